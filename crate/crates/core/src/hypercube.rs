//! Arrangement of variable indices in a d-dimensional side-k array with
//! empty cells, fibre traversal, seeded randomisation, and pairing of
//! near-collinear variables under a single representative.

use crate::error::{Error, Result};
use crate::linalg::corr;
use crate::rng::rng_from;
use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

/// Smallest side `k >= 2` such that `k^dims` holds `p_effective` indices.
/// Excess cells are left empty.
pub fn choose_shape(p_effective: usize, dims: usize) -> (usize, usize) {
    assert!(dims >= 1, "dims must be at least 1");
    let mut k = 2usize;
    while k.pow(dims as u32) < p_effective {
        k += 1;
    }
    (dims, k)
}

/// One row/column/tube of the array: the occupied cells along `axis` at a
/// fixed anchor of the remaining coordinates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fibre {
    pub axis: usize,
    pub anchor: Vec<usize>,
    pub members: Vec<usize>,
}

/// A seeded random injection of variable indices into the cells of the array.
/// Regeneration from `(indices, dims, side, seed)` is bit-identical.
#[derive(Debug, Clone)]
pub struct Arrangement {
    dims: usize,
    side: usize,
    seed: u64,
    /// cell id -> occupant
    cells: Vec<Option<usize>>,
    /// occupant -> cell id
    positions: BTreeMap<usize, usize>,
}

#[derive(Debug, Serialize)]
pub struct ArrangementRecord {
    pub dims: usize,
    pub side: usize,
    pub seed: u64,
    pub cells: Vec<(Vec<usize>, usize)>,
}

impl Arrangement {
    /// Uniformly random injection of `indices` into the `side^dims` cells,
    /// by a seeded Fisher-Yates shuffle of the cell ids.
    pub fn randomise(indices: &[usize], dims: usize, side: usize, seed: u64) -> Result<Self> {
        if dims < 1 || side < 2 {
            return Err(Error::invalid("need dims >= 1 and side >= 2"));
        }
        let cells_total = side
            .checked_pow(dims as u32)
            .ok_or_else(|| Error::invalid("array size overflows"))?;
        if indices.len() > cells_total {
            return Err(Error::Overflow {
                indices: indices.len(),
                cells: cells_total,
            });
        }
        let mut uniq: Vec<usize> = indices.to_vec();
        uniq.sort_unstable();
        uniq.dedup();
        if uniq.len() != indices.len() {
            return Err(Error::invalid("duplicate variable indices"));
        }

        let mut rng = rng_from(seed);
        let mut cell_ids: Vec<usize> = (0..cells_total).collect();
        for i in (1..cells_total).rev() {
            let j = rng.random_range(0..=i);
            cell_ids.swap(i, j);
        }

        let mut cells = vec![None; cells_total];
        let mut positions = BTreeMap::new();
        for (slot, &index) in indices.iter().enumerate() {
            cells[cell_ids[slot]] = Some(index);
            positions.insert(index, cell_ids[slot]);
        }
        Ok(Arrangement {
            dims,
            side,
            seed,
            cells,
            positions,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn occupied(&self) -> usize {
        self.positions.len()
    }

    pub fn arranged_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.positions.keys().copied()
    }

    pub fn cell_of(&self, index: usize) -> Option<usize> {
        self.positions.get(&index).copied()
    }

    /// Coordinates of a cell id (axis 0 varies fastest).
    pub fn coords(&self, cell: usize) -> Vec<usize> {
        let mut c = cell;
        (0..self.dims)
            .map(|_| {
                let digit = c % self.side;
                c /= self.side;
                digit
            })
            .collect()
    }

    fn cell_id(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .rev()
            .fold(0usize, |acc, &c| acc * self.side + c)
    }

    /// All non-empty fibres in deterministic axis-major order. Every arranged
    /// index appears in exactly `dims` fibres.
    pub fn fibres(&self) -> Vec<Fibre> {
        let mut out = Vec::with_capacity(self.dims * self.side.pow(self.dims as u32 - 1));
        let mut anchor = vec![0usize; self.dims.saturating_sub(1)];
        for axis in 0..self.dims {
            loop {
                let mut members = Vec::new();
                let mut coords = Vec::with_capacity(self.dims);
                for t in 0..self.side {
                    coords.clear();
                    let mut a = anchor.iter();
                    for ax in 0..self.dims {
                        coords.push(if ax == axis { t } else { *a.next().unwrap() });
                    }
                    if let Some(idx) = self.cells[self.cell_id(&coords)] {
                        members.push(idx);
                    }
                }
                if !members.is_empty() {
                    out.push(Fibre {
                        axis,
                        anchor: anchor.clone(),
                        members,
                    });
                }
                // next anchor (mixed-radix increment), or move to the next axis
                let mut pos = 0;
                loop {
                    if pos == anchor.len() {
                        break;
                    }
                    anchor[pos] += 1;
                    if anchor[pos] < self.side {
                        break;
                    }
                    anchor[pos] = 0;
                    pos += 1;
                }
                if pos == anchor.len() {
                    anchor.iter_mut().for_each(|a| *a = 0);
                    break;
                }
            }
        }
        out
    }

    /// Number of marked indices sharing a fibre with `of` (cells differing
    /// from its cell in exactly one coordinate).
    pub fn companion_count(&self, of: usize, marked: &BTreeSet<usize>) -> usize {
        let Some(cell) = self.cell_of(of) else {
            return 0;
        };
        let base = self.coords(cell);
        marked
            .iter()
            .filter(|&&m| m != of)
            .filter(|&&m| {
                self.cell_of(m).is_some_and(|c| {
                    let other = self.coords(c);
                    base.iter().zip(&other).filter(|(a, b)| a != b).count() == 1
                })
            })
            .count()
    }

    /// Number of the `dims` fibres through `of` that contain no other marked
    /// index.
    pub fn unaccompanied_fibres(&self, of: usize, marked: &BTreeSet<usize>) -> usize {
        let Some(cell) = self.cell_of(of) else {
            return 0;
        };
        let base = self.coords(cell);
        let mut accompanied = vec![false; self.dims];
        for &m in marked.iter().filter(|&&m| m != of) {
            if let Some(c) = self.cell_of(m) {
                let other = self.coords(c);
                let diff: Vec<usize> = (0..self.dims).filter(|&ax| base[ax] != other[ax]).collect();
                if diff.len() == 1 {
                    accompanied[diff[0]] = true;
                }
            }
        }
        accompanied.iter().filter(|a| !**a).count()
    }

    pub fn to_record(&self) -> ArrangementRecord {
        let cells = self
            .cells
            .iter()
            .enumerate()
            .filter_map(|(id, occ)| occ.map(|idx| (self.coords(id), idx)))
            .collect();
        ArrangementRecord {
            dims: self.dims,
            side: self.side,
            seed: self.seed,
            cells,
        }
    }

    /// Structured text record for audit trails.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "arrangement dims={} side={} seed={} occupied={}",
            self.dims,
            self.side,
            self.seed,
            self.occupied()
        );
        for (coords, idx) in self.to_record().cells {
            let joined: Vec<String> = coords.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(s, "cell ({}) -> {}", joined.join(","), idx);
        }
        s
    }
}

/// Expected number of marked companions of a fixed marked index, for a
/// square (`dims == 2`) or cube (`dims == 3`) holding `a_size` marked indices.
/// Evaluated in the unreduced conditional-count form
/// `dims * (a_size - 1) * (k - 1) / (k^dims - 1)`.
pub fn expected_companions(a_size: usize, k: usize, dims: usize) -> f64 {
    let cells = k.pow(dims as u32) as f64;
    dims as f64 * (a_size as f64 - 1.0) * (k as f64 - 1.0) / (cells - 1.0)
}

/// Nominal closed-form lower bound on the probability that every one of
/// `a_size` marked indices in a side-`k` cube is unaccompanied by other
/// marked indices in at least two of its three fibres.
///
/// This form counts one configuration per unordered index triple. The event
/// is centred on one member of the triple, so the union over configurations
/// needs three times the subtracted term; see [`unaccompanied_union_bound`]
/// for the version the empirical probability provably dominates (exhaustive
/// enumeration at k = 2, |A| = 3 gives exactly that value).
pub fn unaccompanied_bound(a_size: usize, k: usize) -> f64 {
    let a = a_size as f64;
    let kf = k as f64;
    let cells = kf * kf * kf;
    1.0 - a * (a - 1.0) * (a - 2.0) * (kf - 1.0) * (kf - 1.0) / ((cells - 1.0) * (cells - 2.0))
}

/// Valid union lower bound for the same event: one configuration per
/// (centre, companion-pair) choice, i.e. three per unordered triple.
pub fn unaccompanied_union_bound(a_size: usize, k: usize) -> f64 {
    let a = a_size as f64;
    let kf = k as f64;
    let cells = kf * kf * kf;
    1.0 - 3.0 * a * (a - 1.0) * (a - 2.0) * (kf - 1.0) * (kf - 1.0)
        / ((cells - 1.0) * (cells - 2.0))
}

/// Partition of a set of variable indices into single-linkage groups of
/// near-collinear columns, each represented by its lowest index.
#[derive(Debug, Clone, Serialize)]
pub struct PairingGroups {
    /// Disjoint groups covering all considered indices; each sorted
    /// ascending, so `group[0]` is the representative.
    pub groups: Vec<Vec<usize>>,
    pub threshold: f64,
}

impl PairingGroups {
    /// The trivial partition: every index its own representative.
    pub fn singletons(indices: &[usize]) -> Self {
        PairingGroups {
            groups: indices.iter().map(|i| vec![*i]).collect(),
            threshold: 1.0,
        }
    }

    pub fn representatives(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g[0]).collect()
    }

    pub fn group_of(&self, index: usize) -> Option<&[usize]> {
        self.groups
            .iter()
            .find(|g| g.contains(&index))
            .map(|g| g.as_slice())
    }

    pub fn multi_member_groups(&self) -> usize {
        self.groups.iter().filter(|g| g.len() > 1).count()
    }
}

/// Single-linkage grouping of the given columns by absolute sample
/// correlation at or above `threshold`. Zero-norm columns form singletons.
pub fn pair_collinear_on(x: &DMatrix<f64>, indices: &[usize], threshold: f64) -> PairingGroups {
    assert!(
        threshold > 0.0 && threshold < 1.0,
        "threshold must lie in (0, 1)"
    );
    let m = indices.len();
    let mut parent: Vec<usize> = (0..m).collect();
    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut i = i;
        while parent[i] != root {
            let next = parent[i];
            parent[i] = root;
            i = next;
        }
        root
    }
    let cols: Vec<_> = indices.iter().map(|&j| x.column(j).into_owned()).collect();
    for i in 0..m {
        for j in (i + 1)..m {
            if let Ok(r) = corr(&cols[i], &cols[j]) {
                if r.abs() >= threshold {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri.max(rj)] = ri.min(rj);
                    }
                }
            }
        }
    }
    let mut by_root: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..m {
        let root = find(&mut parent, i);
        by_root.entry(indices[root]).or_default().push(indices[i]);
    }
    let groups = by_root
        .into_values()
        .map(|mut g| {
            g.sort_unstable();
            g
        })
        .collect();
    PairingGroups { groups, threshold }
}

/// [`pair_collinear_on`] over every column of `x`.
pub fn pair_collinear(x: &DMatrix<f64>, threshold: f64) -> PairingGroups {
    let all: Vec<usize> = (0..x.ncols()).collect();
    pair_collinear_on(x, &all, threshold)
}

/// Replace each retained representative by its full pairing group.
pub fn unpair(retained: &BTreeSet<usize>, groups: &PairingGroups) -> BTreeSet<usize> {
    let mut out = BTreeSet::new();
    for &idx in retained {
        match groups.group_of(idx) {
            Some(group) if group[0] == idx => out.extend(group.iter().copied()),
            _ => {
                out.insert(idx);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::testutil::centred_gauss;
    use crate::rng::rng_from;
    use nalgebra::DVector;

    #[test]
    fn choose_shape_reference_points() {
        assert_eq!(choose_shape(1000, 3), (3, 10));
        assert_eq!(choose_shape(2, 2), (2, 2));
        assert_eq!(choose_shape(126, 3), (3, 6));
        assert_eq!(choose_shape(125, 3), (3, 5));
    }

    #[test]
    fn randomise_is_deterministic_per_seed() {
        let idx: Vec<usize> = (0..20).collect();
        let a = Arrangement::randomise(&idx, 3, 3, 99).unwrap();
        let b = Arrangement::randomise(&idx, 3, 3, 99).unwrap();
        assert_eq!(a.cells, b.cells);
        let c = Arrangement::randomise(&idx, 3, 3, 100).unwrap();
        assert_ne!(a.cells, c.cells);
    }

    #[test]
    fn randomise_full_array_has_no_empty_cells() {
        let idx: Vec<usize> = (0..27).collect();
        let a = Arrangement::randomise(&idx, 3, 3, 1).unwrap();
        assert!(a.cells.iter().all(|c| c.is_some()));
        assert_eq!(a.occupied(), 27);
    }

    #[test]
    fn randomise_rejects_overflow_and_duplicates() {
        let idx: Vec<usize> = (0..28).collect();
        assert!(matches!(
            Arrangement::randomise(&idx, 3, 3, 1),
            Err(Error::Overflow {
                indices: 28,
                cells: 27
            })
        ));
        assert!(Arrangement::randomise(&[1, 1], 2, 2, 1).is_err());
    }

    #[test]
    fn placement_frequencies_are_uniform() {
        // index x cell occupancy over many seeds; each frequency should sit
        // within 3 binomial standard errors of 1/27 (seed chosen fixed).
        let idx: Vec<usize> = (0..27).collect();
        let reps = 10_000usize;
        let mut counts = vec![vec![0u32; 27]; 27];
        for s in 0..reps {
            let a = Arrangement::randomise(&idx, 3, 3, 30_000 + s as u64).unwrap();
            for v in 0..27 {
                counts[v][a.cell_of(v).unwrap()] += 1;
            }
        }
        let p = 1.0 / 27.0;
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        let mut worst: f64 = 0.0;
        for v in 0..27 {
            for c in 0..27 {
                let freq = counts[v][c] as f64 / reps as f64;
                worst = worst.max((freq - p).abs() / se);
            }
        }
        assert!(worst <= 3.0, "worst deviation {worst} standard errors");
    }

    #[test]
    fn fibres_of_full_cube() {
        let idx: Vec<usize> = (0..1000).collect();
        let a = Arrangement::randomise(&idx, 3, 10, 5).unwrap();
        let fibres = a.fibres();
        assert_eq!(fibres.len(), 300);
        assert!(fibres.iter().all(|f| f.members.len() == 10));
    }

    #[test]
    fn fibres_match_enumeration_oracle_with_empties() {
        let idx: Vec<usize> = (0..5).collect();
        let a = Arrangement::randomise(&idx, 2, 4, 11).unwrap();
        let fibres = a.fibres();
        assert!(fibres.len() <= 8);
        assert!(fibres.iter().all(|f| !f.members.is_empty()));
        // oracle: recount members per (axis, anchor) straight from the cells
        for f in &fibres {
            let mut expect = Vec::new();
            for t in 0..4 {
                let coords = if f.axis == 0 {
                    vec![t, f.anchor[0]]
                } else {
                    vec![f.anchor[0], t]
                };
                let id = coords[0] + 4 * coords[1];
                if let Some(v) = a.cells[id] {
                    expect.push(v);
                }
            }
            assert_eq!(f.members, expect);
        }
    }

    #[test]
    fn every_index_lies_in_exactly_dims_fibres() {
        let idx: Vec<usize> = (0..23).collect();
        let a = Arrangement::randomise(&idx, 3, 3, 13).unwrap();
        let mut appearances: BTreeMap<usize, usize> = BTreeMap::new();
        let mut union: BTreeSet<usize> = BTreeSet::new();
        for f in a.fibres() {
            for m in f.members {
                *appearances.entry(m).or_insert(0) += 1;
                union.insert(m);
            }
        }
        assert_eq!(union, a.arranged_indices().collect());
        assert!(appearances.values().all(|&c| c == 3));
    }

    #[test]
    fn companion_count_agrees_with_fibre_scan() {
        let idx: Vec<usize> = (0..60).collect();
        let marked: BTreeSet<usize> = [0, 3, 9, 17, 33, 41].into_iter().collect();
        for seed in 0..40 {
            let a = Arrangement::randomise(&idx, 3, 4, seed).unwrap();
            let direct = a.companion_count(0, &marked);
            let via_fibres: BTreeSet<usize> = a
                .fibres()
                .iter()
                .filter(|f| f.members.contains(&0))
                .flat_map(|f| f.members.iter().copied())
                .filter(|m| *m != 0 && marked.contains(m))
                .collect();
            assert_eq!(direct, via_fibres.len());
        }
    }

    #[test]
    fn expected_companions_spot_values() {
        assert_eq!(expected_companions(1, 5, 2), 0.0);
        // square |A|=6, k=4: 2*5/5 = 2
        assert!((expected_companions(6, 4, 2) - 2.0).abs() < 1e-12);
        // cube |A|=8, k=3: 21/13
        assert!((expected_companions(8, 3, 3) - 21.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn companion_mean_matches_formula_in_monte_carlo() {
        let idx: Vec<usize> = (0..64).collect();
        let marked: BTreeSet<usize> = (0..6).collect();
        let reps = 20_000;
        let mut sum = 0.0f64;
        let mut sum_sq = 0.0f64;
        for s in 0..reps {
            let a = Arrangement::randomise(&idx, 2, 8, 50_000 + s).unwrap();
            let c = a.companion_count(0, &marked) as f64;
            sum += c;
            sum_sq += c * c;
        }
        let mean = sum / reps as f64;
        let var = (sum_sq / reps as f64 - mean * mean).max(0.0);
        let se = (var / reps as f64).sqrt();
        let target = expected_companions(6, 8, 2);
        assert!(
            (mean - target).abs() <= 3.0 * se,
            "mean {mean} vs {target} (se {se})"
        );
    }

    #[test]
    fn unaccompanied_bound_spot_values() {
        assert_eq!(unaccompanied_bound(2, 7), 1.0);
        assert_eq!(unaccompanied_union_bound(2, 7), 1.0);
        let b = unaccompanied_bound(10, 10);
        assert!((b - (1.0 - 58_320.0 / 997_002.0)).abs() < 1e-12);
        assert!((b - 0.94150).abs() < 5e-6);
    }

    #[test]
    fn union_bound_is_exact_on_the_smallest_cube() {
        // exhaustive: 3 marked cells in a 2x2x2 cube; the event fails exactly
        // when one marked cell has both others at Hamming distance one, which
        // happens in 24 of the 56 configurations
        let cells: Vec<Vec<usize>> = (0..8)
            .map(|c| vec![c & 1, (c >> 1) & 1, (c >> 2) & 1])
            .collect();
        let mut good = 0usize;
        let mut total = 0usize;
        for a in 0..8 {
            for b in (a + 1)..8 {
                for c in (b + 1)..8 {
                    total += 1;
                    let trio = [a, b, c];
                    let fails = trio.iter().any(|&centre| {
                        let axes: BTreeSet<usize> = trio
                            .iter()
                            .filter(|&&o| o != centre)
                            .filter_map(|&o| {
                                let diff: Vec<usize> = (0..3)
                                    .filter(|&d| cells[centre][d] != cells[o][d])
                                    .collect();
                                (diff.len() == 1).then(|| diff[0])
                            })
                            .collect();
                        axes.len() >= 2
                    });
                    if !fails {
                        good += 1;
                    }
                }
            }
        }
        let exact = good as f64 / total as f64;
        assert_eq!((good, total), (32, 56));
        assert!((exact - unaccompanied_union_bound(3, 2)).abs() < 1e-12);
        // the nominal form overstates the guarantee here
        assert!(unaccompanied_bound(3, 2) > exact);
    }

    #[test]
    fn empirical_event_probability_dominates_the_union_bound() {
        let idx: Vec<usize> = (0..125).collect();
        let marked: BTreeSet<usize> = (0..4).collect();
        let reps = 20_000u64;
        let hits: u64 = (0..reps)
            .map(|s| {
                let a = Arrangement::randomise(&idx, 3, 5, 90_000 + s).unwrap();
                u64::from(
                    marked
                        .iter()
                        .all(|&m| a.unaccompanied_fibres(m, &marked) >= 2),
                )
            })
            .sum();
        let p_hat = hits as f64 / reps as f64;
        let se = (p_hat * (1.0 - p_hat) / reps as f64).sqrt();
        assert!(
            p_hat >= unaccompanied_union_bound(4, 5) - 3.0 * se,
            "{p_hat}"
        );
    }

    #[test]
    fn two_marked_indices_never_fail_the_unaccompanied_event() {
        let idx: Vec<usize> = (0..27).collect();
        let marked: BTreeSet<usize> = [2, 19].into_iter().collect();
        for s in 0..2_000u64 {
            let a = Arrangement::randomise(&idx, 3, 3, s).unwrap();
            for &m in &marked {
                assert!(a.unaccompanied_fibres(m, &marked) >= 2);
            }
        }
    }

    #[test]
    fn pairing_groups_duplicate_column() {
        let mut rng = rng_from(211);
        let base = centred_gauss(&mut rng, 30, 4);
        let dup = base.column(1).into_owned();
        let x = DMatrix::from_columns(&[
            base.column(0),
            base.column(1),
            base.column(2),
            base.column(3),
            dup.column(0),
        ]);
        let g = pair_collinear(&x, 0.97);
        assert_eq!(g.groups.len(), 4);
        assert!(g.groups.contains(&vec![1, 4]));
        assert_eq!(g.multi_member_groups(), 1);
    }

    #[test]
    fn pairing_all_below_threshold_gives_singletons() {
        let mut rng = rng_from(223);
        let x = centred_gauss(&mut rng, 200, 6);
        let g = pair_collinear(&x, 0.97);
        assert_eq!(g.groups.len(), 6);
        assert!(g.groups.iter().all(|grp| grp.len() == 1));
    }

    #[test]
    fn pairing_chains_transitively() {
        // x1~x2 and x2~x3 high, x1~x3 lower: a single group of three
        let mut rng = rng_from(227);
        let z = centred_gauss(&mut rng, 400, 3);
        let x1 = z.column(0).into_owned();
        let x2 = &x1 * 0.99 + z.column(1).into_owned() * (1.0f64 - 0.99f64 * 0.99).sqrt();
        let x3 = &x2 * 0.99 + z.column(2).into_owned() * (1.0f64 - 0.99f64 * 0.99).sqrt();
        let x = DMatrix::from_columns(&[
            DVector::from(x1).column(0),
            DVector::from(x2).column(0),
            DVector::from(x3).column(0),
        ]);
        let r12 = corr(&x.column(0).into_owned(), &x.column(1).into_owned()).unwrap();
        let r23 = corr(&x.column(1).into_owned(), &x.column(2).into_owned()).unwrap();
        let r13 = corr(&x.column(0).into_owned(), &x.column(2).into_owned()).unwrap();
        let threshold = (r12.min(r23) - 0.001).min(0.999);
        assert!(r13 < threshold, "construction needs the 1-3 link below");
        // transitive-closure oracle on the 3x3 correlation matrix
        let direct_links = [(0, 1, r12), (1, 2, r23), (0, 2, r13)];
        let linked: Vec<(usize, usize)> = direct_links
            .iter()
            .filter(|(_, _, r)| r.abs() >= threshold)
            .map(|(i, j, _)| (*i, *j))
            .collect();
        assert_eq!(linked, vec![(0, 1), (1, 2)]);
        let g = pair_collinear(&x, threshold);
        assert_eq!(g.groups, vec![vec![0, 1, 2]]);
    }

    #[test]
    fn unpair_expands_surviving_representatives_only() {
        let groups = PairingGroups {
            groups: vec![vec![0], vec![3, 7], vec![5]],
            threshold: 0.97,
        };
        let empty = unpair(&BTreeSet::new(), &groups);
        assert!(empty.is_empty());

        let retained: BTreeSet<usize> = [3].into_iter().collect();
        let out = unpair(&retained, &groups);
        assert_eq!(out, [3, 7].into_iter().collect());

        let retained: BTreeSet<usize> = [0, 5].into_iter().collect();
        let out = unpair(&retained, &groups);
        assert_eq!(out, [0, 5].into_iter().collect());
    }

    #[test]
    fn record_round_trips_through_text() {
        let idx: Vec<usize> = (0..5).collect();
        let a = Arrangement::randomise(&idx, 2, 3, 77).unwrap();
        let text = a.to_text();
        assert!(text.starts_with("arrangement dims=2 side=3 seed=77 occupied=5"));
        assert_eq!(text.lines().count(), 6);
        let rec = a.to_record();
        assert_eq!(rec.cells.len(), 5);
        let b = Arrangement::randomise(&idx, 2, 3, 77).unwrap();
        assert_eq!(b.to_text(), text);
    }
}
