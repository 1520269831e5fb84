//! Capture histories and the count tables built on them.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::error::{Error, Result};

/// Fewest lists a [`CaptureDataset`] may have.
pub const MIN_LISTS: usize = 3;
/// Most lists any table may have.
pub const MAX_LISTS: usize = 16;

/// A set of lists, as a bitmask with bit `i` for list `i`.
///
/// Ordered by (order, bitmask) so sorted histories come out singletons
/// first, then pairs, and so on.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CaptureHistory(u32);

impl CaptureHistory {
    pub const EMPTY: CaptureHistory = CaptureHistory(0);

    pub const fn from_bits(bits: u32) -> Self {
        CaptureHistory(bits)
    }

    pub const fn bits(self) -> u32 {
        self.0
    }

    pub const fn singleton(list: usize) -> Self {
        CaptureHistory(1 << list)
    }

    pub fn from_lists<I: IntoIterator<Item = usize>>(lists: I) -> Self {
        CaptureHistory(lists.into_iter().fold(0, |acc, i| acc | (1 << i)))
    }

    /// Number of lists in the history.
    pub const fn order(self) -> u32 {
        self.0.count_ones()
    }

    pub const fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub const fn contains_list(self, list: usize) -> bool {
        self.0 & (1 << list) != 0
    }

    pub const fn is_superset_of(self, other: CaptureHistory) -> bool {
        self.0 & other.0 == other.0
    }

    pub const fn union(self, other: CaptureHistory) -> Self {
        CaptureHistory(self.0 | other.0)
    }

    pub fn lists(self) -> impl Iterator<Item = usize> {
        let bits = self.0;
        (0..32).filter(move |i| bits & (1 << i) != 0)
    }

    /// True when the history is a valid cell of a `t`-list table.
    pub const fn fits(self, t: usize) -> bool {
        (self.0 as u64) < (1u64 << t)
    }

    /// All non-null histories over `t` lists in canonical order.
    pub fn all_nonnull(t: usize) -> Vec<CaptureHistory> {
        let mut v: Vec<_> = (1..(1u32 << t)).map(CaptureHistory).collect();
        v.sort();
        v
    }
}

impl Ord for CaptureHistory {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.order(), self.0).cmp(&(other.order(), other.0))
    }
}

impl PartialOrd for CaptureHistory {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for CaptureHistory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.lists().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// An unordered pair of distinct lists, stored with `i < j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ListPair {
    i: u8,
    j: u8,
}

impl ListPair {
    pub fn new(a: usize, b: usize) -> Result<Self> {
        if a == b {
            return Err(Error::DegeneratePair(a));
        }
        if a.max(b) >= MAX_LISTS {
            return Err(Error::ListIndex {
                index: a.max(b),
                t: MAX_LISTS,
            });
        }
        let (i, j) = if a < b { (a, b) } else { (b, a) };
        Ok(ListPair {
            i: i as u8,
            j: j as u8,
        })
    }

    pub const fn i(self) -> usize {
        self.i as usize
    }

    pub const fn j(self) -> usize {
        self.j as usize
    }

    pub const fn history(self) -> CaptureHistory {
        CaptureHistory((1 << self.i) | (1 << self.j))
    }

    /// Every pair over `t` lists, lexicographic in `(i, j)`.
    pub fn all(t: usize) -> impl Iterator<Item = ListPair> {
        (0..t).flat_map(move |i| {
            (i + 1..t).map(move |j| ListPair {
                i: i as u8,
                j: j as u8,
            })
        })
    }
}

/// Dense table of counts indexed by capture-history bitmask.
///
/// This is the numeric view used by every fitting routine. It accepts any
/// `1 <= t <= 16`, which lets small sub-problems (two lists) be fitted
/// directly; [`CaptureDataset`] adds labels and the `t >= 3` rule.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellCounts {
    t: usize,
    counts: Vec<u64>,
}

impl CellCounts {
    /// Builds a table from a dense vector of length `2^t`; entry 0 must be 0.
    pub fn new(t: usize, counts: Vec<u64>) -> Result<Self> {
        if t == 0 || t > MAX_LISTS {
            return Err(Error::TableSize(t));
        }
        if counts.len() != 1 << t {
            return Err(Error::CellCount {
                got: counts.len(),
                expected: 1 << t,
            });
        }
        if counts[0] != 0 {
            return Err(Error::NullHistoryCount(counts[0]));
        }
        if counts.iter().all(|&c| c == 0) {
            return Err(Error::EmptyDataset);
        }
        Ok(CellCounts { t, counts })
    }

    /// Builds a table from sparse `(history, count)` entries, summing duplicates.
    pub fn from_entries<I>(t: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (CaptureHistory, u64)>,
    {
        if t == 0 || t > MAX_LISTS {
            return Err(Error::TableSize(t));
        }
        let mut counts = vec![0u64; 1 << t];
        for (h, c) in entries {
            if !h.fits(t) {
                return Err(Error::HistoryOutOfRange { bits: h.bits(), t });
            }
            if h.is_empty() && c > 0 {
                return Err(Error::NullHistoryCount(c));
            }
            counts[h.bits() as usize] += c;
        }
        Self::new(t, counts)
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Count `N_ω` of individuals with exactly history `ω`.
    pub fn count(&self, h: CaptureHistory) -> u64 {
        self.counts[h.bits() as usize]
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.counts
    }

    /// Total observed `m`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// `N*_ω`: individuals seen on every list of `ω` (and possibly others).
    /// For the empty history this is the total observed.
    pub fn marginal_total(&self, h: CaptureHistory) -> u64 {
        let free = !h.bits() & ((1u32 << self.t) - 1);
        // Enumerate the subsets of the free bits.
        let mut sub = free;
        let mut total = 0;
        loop {
            total += self.counts[(h.bits() | sub) as usize];
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & free;
        }
        total
    }

    /// `N*_ω` for every history at once (superset-sum transform).
    pub fn marginal_totals(&self) -> Vec<u64> {
        let mut out = self.counts.clone();
        for bit in 0..self.t {
            for s in 0..out.len() {
                if s & (1 << bit) == 0 {
                    out[s] += out[s | (1 << bit)];
                }
            }
        }
        out
    }

    /// Pairs of lists with no individual in common.
    pub fn nonoverlapping_pairs(&self) -> Vec<ListPair> {
        let star = self.marginal_totals();
        ListPair::all(self.t)
            .filter(|p| star[p.history().bits() as usize] == 0)
            .collect()
    }

    /// Observed histories (positive counts) in canonical order.
    pub fn observed(&self) -> Vec<(CaptureHistory, u64)> {
        let mut v: Vec<_> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(b, &c)| (CaptureHistory(b as u32), c))
            .collect();
        v.sort_by_key(|e| e.0);
        v
    }

    /// Same table with one cell replaced. Fails if the result is empty.
    pub fn with_count(&self, h: CaptureHistory, count: u64) -> Result<Self> {
        if !h.fits(self.t) {
            return Err(Error::HistoryOutOfRange {
                bits: h.bits(),
                t: self.t,
            });
        }
        let mut counts = self.counts.clone();
        counts[h.bits() as usize] = count;
        Self::new(self.t, counts)
    }

    /// Table over the lists in `keep` (in the given order); an individual
    /// keeps its count in the cell of its restricted history, and those
    /// seen on none of the kept lists drop out.
    pub fn restrict(&self, keep: &[usize]) -> Result<Self> {
        for &k in keep {
            if k >= self.t {
                return Err(Error::ListIndex { index: k, t: self.t });
            }
        }
        let mut counts = vec![0u64; 1 << keep.len()];
        for (bits, &c) in self.counts.iter().enumerate() {
            let mut new = 0usize;
            for (pos, &k) in keep.iter().enumerate() {
                if bits & (1 << k) != 0 {
                    new |= 1 << pos;
                }
            }
            if new != 0 {
                counts[new] += c;
            }
        }
        Self::new(keep.len(), counts)
    }
}

/// Labelled capture-recapture data over `3..=16` lists.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CaptureDataset {
    labels: Vec<String>,
    cells: CellCounts,
}

impl CaptureDataset {
    pub fn new(labels: Vec<String>, cells: CellCounts) -> Result<Self> {
        let t = labels.len();
        if !(MIN_LISTS..=MAX_LISTS).contains(&t) {
            return Err(Error::ListCount(t));
        }
        if cells.t() != t {
            return Err(Error::CellCount {
                got: 1 << cells.t(),
                expected: 1 << t,
            });
        }
        for (k, l) in labels.iter().enumerate() {
            if labels[..k].contains(l) {
                return Err(Error::DuplicateLabel(l.clone()));
            }
        }
        Ok(CaptureDataset { labels, cells })
    }

    /// Builds from `(history, count)` entries, summing duplicates.
    pub fn from_entries<S, I>(labels: &[S], entries: I) -> Result<Self>
    where
        S: AsRef<str>,
        I: IntoIterator<Item = (CaptureHistory, u64)>,
    {
        let t = labels.len();
        if !(MIN_LISTS..=MAX_LISTS).contains(&t) {
            return Err(Error::ListCount(t));
        }
        let labels: Vec<String> = labels.iter().map(|s| s.as_ref().to_string()).collect();
        let cells = CellCounts::from_entries(t, entries)?;
        Self::new(labels, cells)
    }

    /// Builds from entries whose histories are given as label lists,
    /// e.g. `(&["A", "B"], 6)`.
    pub fn from_labelled<S: AsRef<str>>(labels: &[S], entries: &[(&[&str], u64)]) -> Result<Self> {
        let names: Vec<&str> = labels.iter().map(|s| s.as_ref()).collect();
        let mut out = Vec::with_capacity(entries.len());
        for (lists, c) in entries {
            let mut h = CaptureHistory::EMPTY;
            for l in lists.iter() {
                let i = names
                    .iter()
                    .position(|n| n == l)
                    .ok_or_else(|| Error::UnknownLabel(l.to_string()))?;
                h = h.union(CaptureHistory::singleton(i));
            }
            out.push((h, *c));
        }
        Self::from_entries(labels, out)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn t(&self) -> usize {
        self.labels.len()
    }

    pub fn cells(&self) -> &CellCounts {
        &self.cells
    }

    pub fn total(&self) -> u64 {
        self.cells.total()
    }

    pub fn count(&self, h: CaptureHistory) -> u64 {
        self.cells.count(h)
    }

    pub fn marginal_total(&self, h: CaptureHistory) -> u64 {
        self.cells.marginal_total(h)
    }

    pub fn nonoverlapping_pairs(&self) -> Vec<ListPair> {
        self.cells.nonoverlapping_pairs()
    }

    pub fn observed(&self) -> Vec<(CaptureHistory, u64)> {
        self.cells.observed()
    }

    /// Same labels, different counts.
    pub fn with_cells(&self, cells: CellCounts) -> Result<Self> {
        Self::new(self.labels.clone(), cells)
    }

    pub fn label_index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    /// Lists of a history joined by `&`, e.g. `A&B`.
    pub fn history_label(&self, h: CaptureHistory) -> String {
        if h.is_empty() {
            return String::from("(none)");
        }
        let parts: Vec<&str> = h.lists().map(|i| self.labels[i].as_str()).collect();
        parts.join("&")
    }

    /// Pair written as `A:B`.
    pub fn pair_label(&self, p: ListPair) -> String {
        format!("{}:{}", self.labels[p.i()], self.labels[p.j()])
    }

    /// Parses `A:B`, or `AB` when exactly one split yields two labels.
    pub fn parse_pair(&self, text: &str) -> Result<ListPair> {
        let text = text.trim();
        if let Some((a, b)) = text.split_once(':') {
            return ListPair::new(self.label_index(a.trim())?, self.label_index(b.trim())?);
        }
        let mut found = None;
        for (k, _) in text.char_indices().skip(1) {
            let (a, b) = text.split_at(k);
            if let (Ok(i), Ok(j)) = (self.label_index(a), self.label_index(b)) {
                if found.is_some() {
                    return Err(Error::BadPair(text.to_string()));
                }
                found = Some((i, j));
            }
        }
        let (i, j) = found.ok_or_else(|| Error::BadPair(text.to_string()))?;
        ListPair::new(i, j)
    }

    /// Collapses the lists in `group` into one list labelled `new_label`.
    ///
    /// The merged list takes the position of the lowest index in the group;
    /// an individual is on it when it was on any list of the group.
    pub fn merge_lists(&self, group: &[usize], new_label: &str) -> Result<Self> {
        let t = self.t();
        let mut group: Vec<usize> = group.to_vec();
        group.sort_unstable();
        group.dedup();
        if group.len() < 2 {
            return Err(Error::MergeGroup(group.len()));
        }
        if let Some(&bad) = group.iter().find(|&&g| g >= t) {
            return Err(Error::ListIndex { index: bad, t });
        }
        let first = group[0];
        // Map each old list to its new index.
        let mut target = vec![0usize; t];
        let mut labels = Vec::with_capacity(t - group.len() + 1);
        for (old, slot) in target.iter_mut().enumerate() {
            if group.contains(&old) && old != first {
                continue;
            }
            let new = labels.len();
            if old == first {
                labels.push(new_label.to_string());
            } else {
                labels.push(self.labels[old].clone());
            }
            *slot = new;
        }
        for &g in &group {
            target[g] = target[first];
        }
        let mut merged: BTreeMap<CaptureHistory, u64> = BTreeMap::new();
        for (h, c) in self.observed() {
            let nh = CaptureHistory::from_lists(h.lists().map(|i| target[i]));
            *merged.entry(nh).or_default() += c;
        }
        Self::from_entries(&labels, merged)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn artificial() -> CaptureDataset {
        CaptureDataset::from_labelled(
            &["A", "B", "C"],
            &[(&["A"], 40), (&["B"], 30), (&["C"], 20), (&["A", "B"], 6)],
        )
        .unwrap()
    }

    #[test]
    fn history_order_is_by_order_then_bits() {
        let mut v = [
            CaptureHistory::from_bits(3),
            CaptureHistory::from_bits(4),
            CaptureHistory::from_bits(1),
            CaptureHistory::from_bits(7),
        ];
        v.sort();
        let bits: Vec<u32> = v.iter().map(|h| h.bits()).collect();
        assert_eq!(bits, [1, 4, 3, 7]);
    }

    #[test]
    fn marginal_totals_agree_with_direct_sum() {
        let d = artificial();
        let star = d.cells().marginal_totals();
        for b in 0..8u32 {
            assert_eq!(star[b as usize], d.marginal_total(CaptureHistory::from_bits(b)));
        }
        assert_eq!(d.marginal_total(CaptureHistory::EMPTY), 96);
        assert_eq!(d.marginal_total(CaptureHistory::from_bits(0b011)), 6);
    }

    #[test]
    fn artificial_nonoverlapping() {
        let d = artificial();
        let pairs = d.nonoverlapping_pairs();
        assert_eq!(
            pairs,
            [ListPair::new(0, 2).unwrap(), ListPair::new(1, 2).unwrap()]
        );
    }

    #[test]
    fn null_history_rejected() {
        let err = CaptureDataset::from_entries(&["A", "B", "C"], [(CaptureHistory::EMPTY, 5)]);
        assert_eq!(err, Err(Error::NullHistoryCount(5)));
    }

    #[test]
    fn list_count_limits() {
        let two = CaptureDataset::from_entries(&["A", "B"], [(CaptureHistory::from_bits(1), 1)]);
        assert_eq!(two, Err(Error::ListCount(2)));
        let labels: Vec<String> = (0..17).map(|i| format!("L{i}")).collect();
        assert_eq!(
            CaptureDataset::from_entries(&labels, [(CaptureHistory::from_bits(1), 1)]),
            Err(Error::ListCount(17))
        );
    }

    #[test]
    fn duplicate_labels_rejected() {
        let err = CaptureDataset::from_entries(&["A", "B", "A"], [(CaptureHistory::from_bits(1), 1)]);
        assert_eq!(err, Err(Error::DuplicateLabel("A".into())));
    }

    #[test]
    fn parse_pair_forms() {
        let d = artificial();
        let ab = ListPair::new(0, 1).unwrap();
        assert_eq!(d.parse_pair("A:B").unwrap(), ab);
        assert_eq!(d.parse_pair("BA").unwrap(), ab);
        assert!(d.parse_pair("A:A").is_err());
        assert!(d.parse_pair("AX").is_err());
        assert_eq!(d.pair_label(ab), "A:B");
    }

    #[test]
    fn merge_disjoint_lists_sums_singletons() {
        let d = CaptureDataset::from_labelled(
            &["A", "B", "C", "D"],
            &[
                (&["A"], 40),
                (&["B"], 30),
                (&["C"], 20),
                (&["D"], 9),
                (&["A", "B"], 6),
                (&["B", "D"], 2),
            ],
        )
        .unwrap();
        // A and C never overlap.
        let merged = d.merge_lists(&[2, 0], "AC").unwrap();
        assert_eq!(merged.labels(), ["AC", "B", "D"].map(String::from));
        assert_eq!(merged.count(CaptureHistory::from_bits(0b001)), 60);
        assert_eq!(merged.count(CaptureHistory::from_bits(0b011)), 6);
        assert_eq!(merged.count(CaptureHistory::from_bits(0b110)), 2);
        assert_eq!(merged.total(), d.total());
    }

    #[test]
    fn merge_needs_two_lists() {
        let d = artificial();
        assert_eq!(d.merge_lists(&[1], "X"), Err(Error::MergeGroup(1)));
        assert_eq!(d.merge_lists(&[1, 1], "X"), Err(Error::MergeGroup(1)));
        assert_eq!(
            d.merge_lists(&[1, 5], "X"),
            Err(Error::ListIndex { index: 5, t: 3 })
        );
    }

    #[test]
    fn restrict_keeps_projection() {
        let d = artificial();
        let ab = d.cells().restrict(&[0, 1]).unwrap();
        assert_eq!(ab.t(), 2);
        assert_eq!(ab.as_slice(), &[0, 40, 30, 6]);
    }
}
