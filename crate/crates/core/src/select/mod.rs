//! Representative-image selection.
//!
//! Given pairwise distances and per-image importance, a summary is a fixed-size
//! subset of images. The residual cost of a subset is the worst importance-
//! weighted distance from any unselected image to its nearest representative;
//! selection tries to minimize that cost. Three strategies are provided:
//!
//! * [`greedy`]: start from the full set and repeatedly drop the image that is
//!   cheapest to cover, until the target size is reached. O(n^3) worst case.
//! * [`exhaustive`]: enumerate every subset of the target size and keep the
//!   best. Guarded by a hard cap on the number of combinations.
//! * [`k_medoids`]: classic alternating medoid refinement, importance-seeded.
//!   Serves as a clustering baseline for comparison runs.

pub mod instance;

use crate::error::{Error, Result};
use crate::types::{DistanceMatrix, ImportanceVector, SelectionMethod, Summary};

/// Hard cap on the subset count [`exhaustive`] is willing to enumerate.
pub const EXHAUSTIVE_COMBINATION_LIMIT: u128 = 10_000_000;

/// A selection task: distances and importance over the same image ids, plus
/// the requested summary size. Sizes larger than the image count are clamped
/// at solve time.
#[derive(Clone, Debug)]
pub struct SelectionProblem {
    distances: DistanceMatrix,
    importance: ImportanceVector,
    summary_size: usize,
}

impl SelectionProblem {
    pub fn new(
        distances: DistanceMatrix,
        importance: ImportanceVector,
        summary_size: usize,
    ) -> Result<Self> {
        if importance.len() != distances.n() {
            return Err(Error::DimensionMismatch {
                expected: format!("importance for {} images", distances.n()),
                actual: format!("{} entries", importance.len()),
            });
        }
        if summary_size == 0 {
            return Err(Error::InvalidInput("summary size must be at least 1".into()));
        }
        Ok(Self {
            distances,
            importance,
            summary_size,
        })
    }

    pub fn n(&self) -> usize {
        self.distances.n()
    }

    /// Requested size clamped to the image count.
    pub fn effective_size(&self) -> usize {
        self.summary_size.min(self.n())
    }

    pub fn summary_size(&self) -> usize {
        self.summary_size
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.distances
    }

    pub fn importance(&self) -> &ImportanceVector {
        &self.importance
    }
}

/// Residual coverage cost of `selected`: the maximum over unselected images
/// of importance times the distance to the nearest selected image. 0 when
/// every image is selected. Errors on an empty, duplicated, or out-of-range
/// selection.
pub fn objective(problem: &SelectionProblem, selected: &[usize]) -> Result<f64> {
    if selected.is_empty() {
        return Err(Error::EmptyInput("selection of zero images".into()));
    }
    let n = problem.n();
    let mut member = vec![false; n];
    for &id in selected {
        if id >= n {
            return Err(Error::InvalidInput(format!(
                "selected id {id} out of range for {n} images"
            )));
        }
        if member[id] {
            return Err(Error::InvalidInput(format!("selected id {id} repeated")));
        }
        member[id] = true;
    }
    Ok(objective_unchecked(problem, &member, selected))
}

fn objective_unchecked(problem: &SelectionProblem, member: &[bool], selected: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..problem.n() {
        if member[i] {
            continue;
        }
        let mut nearest = f64::INFINITY;
        for &r in selected {
            let d = problem.distances.get(i, r);
            if d < nearest {
                nearest = d;
            }
        }
        let cost = problem.importance.get(i) * nearest;
        if cost > worst {
            worst = cost;
        }
    }
    worst
}

fn summary_of(problem: &SelectionProblem, segment_id: &str, mut ids: Vec<usize>, method: SelectionMethod) -> Summary {
    ids.sort_unstable();
    let mut member = vec![false; problem.n()];
    for &id in &ids {
        member[id] = true;
    }
    let objective = objective_unchecked(problem, &member, &ids);
    Summary {
        segment_id: segment_id.to_string(),
        method,
        selected: ids,
        objective,
    }
}

/// Subtractive greedy selection: drop the image whose removal is cheapest to
/// absorb (lowest importance times distance to its nearest remaining peer)
/// until the target size is reached. Ties drop the lowest id.
pub fn greedy(problem: &SelectionProblem, segment_id: &str) -> Summary {
    let n = problem.n();
    let target = problem.effective_size();
    let mut selected: Vec<usize> = (0..n).collect();

    while selected.len() > target {
        let mut best_cost = f64::INFINITY;
        let mut best_pos = 0;
        // Ascending iteration plus strict improvement keeps the lowest id on ties.
        for (pos, &k) in selected.iter().enumerate() {
            let mut nearest = f64::INFINITY;
            for &p in &selected {
                if p != k {
                    let d = problem.distances.get(k, p);
                    if d < nearest {
                        nearest = d;
                    }
                }
            }
            let cost = problem.importance.get(k) * nearest;
            if cost < best_cost {
                best_cost = cost;
                best_pos = pos;
            }
        }
        selected.remove(best_pos);
    }

    summary_of(problem, segment_id, selected, SelectionMethod::Greedy)
}

fn combination_count(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut count: u128 = 1;
    for i in 0..k {
        count = count.saturating_mul((n - i) as u128) / (i as u128 + 1);
        if count > EXHAUSTIVE_COMBINATION_LIMIT {
            return count;
        }
    }
    count
}

/// True optimum by enumerating every subset of the effective size in
/// lexicographic order; ties keep the lexicographically smallest id set.
/// Refuses instances with more than [`EXHAUSTIVE_COMBINATION_LIMIT`] subsets.
pub fn exhaustive(problem: &SelectionProblem, segment_id: &str) -> Result<Summary> {
    let n = problem.n();
    let m = problem.effective_size();
    if m == n {
        return Ok(summary_of(
            problem,
            segment_id,
            (0..n).collect(),
            SelectionMethod::Exhaustive,
        ));
    }
    let combinations = combination_count(n, m);
    if combinations > EXHAUSTIVE_COMBINATION_LIMIT {
        return Err(Error::SearchSpaceTooLarge {
            n,
            m,
            combinations,
            limit: EXHAUSTIVE_COMBINATION_LIMIT,
        });
    }

    let mut combo: Vec<usize> = (0..m).collect();
    let mut member = vec![false; n];
    let mut best: Vec<usize> = combo.clone();
    let mut best_cost = f64::INFINITY;
    loop {
        for f in member.iter_mut() {
            *f = false;
        }
        for &id in &combo {
            member[id] = true;
        }
        let cost = objective_unchecked(problem, &member, &combo);
        // Strict improvement: the first (lexicographically smallest) subset
        // wins ties.
        if cost < best_cost {
            best_cost = cost;
            best.copy_from_slice(&combo);
        }

        // Advance to the next lexicographic combination.
        let mut i = m;
        let mut advanced = false;
        while i > 0 {
            i -= 1;
            if combo[i] != i + n - m {
                combo[i] += 1;
                for j in i + 1..m {
                    combo[j] = combo[j - 1] + 1;
                }
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }

    Ok(summary_of(problem, segment_id, best, SelectionMethod::Exhaustive))
}

fn medoid_total_cost(problem: &SelectionProblem, medoids: &[usize]) -> f64 {
    let mut total = 0.0;
    for i in 0..problem.n() {
        let mut nearest = f64::INFINITY;
        for &m in medoids {
            let d = problem.distances.get(i, m);
            if d < nearest {
                nearest = d;
            }
        }
        total += nearest;
    }
    total
}

/// K-medoids baseline. Seeds with the most important images (ties toward the
/// lower id), then repeatedly applies the single medoid/non-medoid swap that
/// most reduces the total within-cluster distance until no swap improves it.
/// Fully deterministic.
pub fn k_medoids(problem: &SelectionProblem, segment_id: &str) -> Summary {
    let n = problem.n();
    let m = problem.effective_size();
    if m == n {
        return summary_of(
            problem,
            segment_id,
            (0..n).collect(),
            SelectionMethod::Kmedoid,
        );
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        problem
            .importance
            .get(b)
            .partial_cmp(&problem.importance.get(a))
            .expect("importance values are finite")
            .then(a.cmp(&b))
    });
    let mut medoids: Vec<usize> = order[..m].to_vec();
    medoids.sort_unstable();
    let mut cost = medoid_total_cost(problem, &medoids);

    loop {
        let mut best_cost = cost;
        let mut best_swap: Option<(usize, usize)> = None;
        let mut is_medoid = vec![false; n];
        for &md in &medoids {
            is_medoid[md] = true;
        }
        for pos in 0..m {
            let original = medoids[pos];
            for h in 0..n {
                if is_medoid[h] {
                    continue;
                }
                let mut trial = medoids.clone();
                trial[pos] = h;
                let trial_cost = medoid_total_cost(problem, &trial);
                // Strict improvement with ascending scan order keeps the
                // first (lowest medoid, lowest candidate) swap on ties.
                if trial_cost < best_cost {
                    best_cost = trial_cost;
                    best_swap = Some((pos, h));
                }
            }
            medoids[pos] = original;
        }
        match best_swap {
            Some((pos, h)) => {
                medoids[pos] = h;
                medoids.sort_unstable();
                cost = best_cost;
            }
            None => break,
        }
    }

    summary_of(problem, segment_id, medoids, SelectionMethod::Kmedoid)
}

#[cfg(test)]
mod tests {
    use super::instance::{planted_clusters_instance, random_instance};
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform_importance(n: usize) -> ImportanceVector {
        ImportanceVector::new(vec![1.0; n]).unwrap()
    }

    /// Two tight triples, far apart, equal importance. The only sensible
    /// 2-summary is one image per cluster.
    fn two_cluster_problem() -> SelectionProblem {
        let mut d = DistanceMatrix::zeros(6).unwrap();
        for i in 0..6 {
            for j in (i + 1)..6 {
                let same = (i < 3) == (j < 3);
                d.set_pair(i, j, if same { 0.05 } else { 0.9 });
            }
        }
        SelectionProblem::new(d, uniform_importance(6), 2).unwrap()
    }

    #[test]
    fn objective_of_full_selection_is_zero() {
        let p = two_cluster_problem();
        assert_eq!(objective(&p, &[0, 1, 2, 3, 4, 5]).unwrap(), 0.0);
    }

    #[test]
    fn objective_rejects_bad_selections() {
        let p = two_cluster_problem();
        assert!(objective(&p, &[]).is_err());
        assert!(objective(&p, &[0, 0]).is_err());
        assert!(objective(&p, &[6]).is_err());
    }

    #[test]
    fn objective_is_the_worst_weighted_nearest_distance() {
        let d = DistanceMatrix::from_rows(vec![
            vec![0.0, 0.2, 0.8],
            vec![0.2, 0.0, 0.4],
            vec![0.8, 0.4, 0.0],
        ])
        .unwrap();
        let imp = ImportanceVector::new(vec![0.5, 1.0, 0.25]).unwrap();
        let p = SelectionProblem::new(d, imp, 1).unwrap();
        // S = {1}: image 0 costs 0.5*0.2, image 2 costs 0.25*0.4.
        assert!((objective(&p, &[1]).unwrap() - 0.1).abs() < 1e-15);
        // S = {0}: image 1 costs 1.0*0.2, image 2 costs 0.25*0.8.
        assert!((objective(&p, &[0]).unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn greedy_keeps_one_image_per_planted_cluster() {
        let p = two_cluster_problem();
        let summary = greedy(&p, "seg");
        assert_eq!(summary.selected.len(), 2);
        let low = summary.selected.iter().filter(|&&id| id < 3).count();
        assert_eq!(low, 1, "one representative per cluster: {:?}", summary.selected);
        let best = exhaustive(&p, "seg").unwrap();
        assert_eq!(summary.objective, best.objective);
    }

    #[test]
    fn single_image_segment_selects_it_with_zero_objective() {
        let d = DistanceMatrix::zeros(1).unwrap();
        let p = SelectionProblem::new(d, uniform_importance(1), 4).unwrap();
        let summary = greedy(&p, "seg");
        assert_eq!(summary.selected, vec![0]);
        assert_eq!(summary.objective, 0.0);
        assert_eq!(summary.method, SelectionMethod::Greedy);
    }

    #[test]
    fn requesting_more_images_than_exist_selects_all() {
        let p = two_cluster_problem();
        let p_all = SelectionProblem::new(
            p.distances().clone(),
            p.importance().clone(),
            10,
        )
        .unwrap();
        for summary in [
            greedy(&p_all, "s"),
            exhaustive(&p_all, "s").unwrap(),
            k_medoids(&p_all, "s"),
        ] {
            assert_eq!(summary.selected, vec![0, 1, 2, 3, 4, 5]);
            assert_eq!(summary.objective, 0.0);
        }
    }

    #[test]
    fn greedy_tie_break_drops_the_lowest_id() {
        // Three mutually equidistant images, equal importance, m = 2:
        // every removal costs the same, so id 0 goes first.
        let mut d = DistanceMatrix::zeros(3).unwrap();
        for i in 0..3 {
            for j in (i + 1)..3 {
                d.set_pair(i, j, 0.5);
            }
        }
        let p = SelectionProblem::new(d, uniform_importance(3), 2).unwrap();
        assert_eq!(greedy(&p, "s").selected, vec![1, 2]);
        // Exhaustive tie-break instead prefers the lexicographically
        // smallest subset.
        assert_eq!(exhaustive(&p, "s").unwrap().selected, vec![0, 1]);
    }

    #[test]
    fn exhaustive_refuses_oversized_search_spaces() {
        let d = DistanceMatrix::zeros(40).unwrap();
        let p = SelectionProblem::new(d, uniform_importance(40), 20).unwrap();
        match exhaustive(&p, "s") {
            Err(Error::SearchSpaceTooLarge { n, m, .. }) => {
                assert_eq!((n, m), (40, 20));
            }
            other => panic!("expected search-space guard, got {other:?}"),
        }
    }

    /// Independent brute-force enumerator used only as a test oracle.
    fn brute_force_best(problem: &SelectionProblem) -> f64 {
        fn recurse(
            problem: &SelectionProblem,
            start: usize,
            chosen: &mut Vec<usize>,
            m: usize,
            best: &mut f64,
        ) {
            if chosen.len() == m {
                let cost = objective(problem, chosen).unwrap();
                if cost < *best {
                    *best = cost;
                }
                return;
            }
            let remaining = m - chosen.len();
            for id in start..=(problem.n() - remaining) {
                chosen.push(id);
                recurse(problem, id + 1, chosen, m, best);
                chosen.pop();
            }
        }
        let mut best = f64::INFINITY;
        recurse(
            problem,
            0,
            &mut Vec::new(),
            problem.effective_size(),
            &mut best,
        );
        best
    }

    #[test]
    fn exhaustive_matches_an_independent_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        for _ in 0..20 {
            let inst = random_instance(8, 4, &mut rng);
            let p = inst.to_problem().unwrap();
            let found = exhaustive(&p, "s").unwrap();
            let oracle = brute_force_best(&p);
            assert!(
                (found.objective - oracle).abs() < 1e-12,
                "exhaustive {} vs brute force {}",
                found.objective,
                oracle
            );
        }
    }

    #[test]
    fn greedy_equals_exhaustive_on_planted_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for round in 0..30 {
            let n = 8 + (round % 5);
            let inst = planted_clusters_instance(n, 4, &mut rng);
            let p = inst.to_problem().unwrap();
            let g = greedy(&p, "s");
            let e = exhaustive(&p, "s").unwrap();
            assert!(
                (g.objective - e.objective).abs() < 1e-12,
                "round {round}: greedy {} vs exhaustive {}",
                g.objective,
                e.objective
            );
        }
    }

    #[test]
    fn greedy_stays_close_to_optimal_on_random_instances() {
        use rand::RngExt;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut exact = 0usize;
        let rounds = 50;
        for _ in 0..rounds {
            let n = 6 + rng.random_range(0..7usize);
            let inst = random_instance(n, 4, &mut rng);
            let p = inst.to_problem().unwrap();
            let g = greedy(&p, "s");
            let e = exhaustive(&p, "s").unwrap();
            assert!(g.objective >= e.objective - 1e-12);
            if (g.objective - e.objective).abs() < 1e-12 {
                exact += 1;
            }
        }
        assert!(exact > 0, "greedy never matched the optimum in {rounds} rounds");
    }

    #[test]
    fn k_medoids_covers_planted_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let inst = planted_clusters_instance(10, 4, &mut rng);
            let p = inst.to_problem().unwrap();
            let summary = k_medoids(&p, "s");
            assert_eq!(summary.selected.len(), 4);
            // Every image must sit within intra-cluster range of some medoid.
            for i in 0..p.n() {
                let nearest = summary
                    .selected
                    .iter()
                    .map(|&m| p.distances().get(i, m))
                    .fold(f64::INFINITY, f64::min);
                assert!(
                    nearest <= 0.1 + 1e-12,
                    "image {i} is {nearest} from its nearest medoid"
                );
            }
        }
    }

    #[test]
    fn solvers_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let inst = random_instance(9, 4, &mut rng);
        let p = inst.to_problem().unwrap();
        assert_eq!(greedy(&p, "s"), greedy(&p, "s"));
        assert_eq!(exhaustive(&p, "s").unwrap(), exhaustive(&p, "s").unwrap());
        assert_eq!(k_medoids(&p, "s"), k_medoids(&p, "s"));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_problem() -> impl Strategy<Value = SelectionProblem> {
            (2usize..10, any::<u64>()).prop_map(|(n, seed)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let m = 1 + (seed as usize) % n;
                random_instance(n, m, &mut rng).to_problem().unwrap()
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn growing_a_selection_never_raises_the_objective(p in arb_problem()) {
                let n = p.n();
                let base: Vec<usize> = (0..(n / 2).max(1)).collect();
                let before = objective(&p, &base).unwrap();
                for extra in base.len()..n {
                    let mut grown = base.clone();
                    grown.push(extra);
                    let after = objective(&p, &grown).unwrap();
                    prop_assert!(after <= before + 1e-12);
                }
            }

            #[test]
            fn greedy_output_is_well_formed(p in arb_problem()) {
                let s = greedy(&p, "seg");
                prop_assert_eq!(s.selected.len(), p.effective_size());
                let mut sorted = s.selected.clone();
                sorted.dedup();
                prop_assert_eq!(sorted.len(), s.selected.len());
                prop_assert!(s.selected.iter().all(|&id| id < p.n()));
                prop_assert!(s.objective >= 0.0);
                prop_assert_eq!(objective(&p, &s.selected).unwrap(), s.objective);
            }

            #[test]
            fn greedy_never_beats_the_optimum(p in arb_problem()) {
                let g = greedy(&p, "seg");
                let e = exhaustive(&p, "seg").unwrap();
                prop_assert!(g.objective >= e.objective - 1e-12);
            }

            #[test]
            fn uniform_importance_scaling_keeps_the_greedy_selection(p in arb_problem()) {
                // Scaling all importances by the same factor rescales every
                // cost comparison identically.
                let scaled_imp = ImportanceVector::new(
                    p.importance().as_slice().iter().map(|v| v * 0.25).collect(),
                ).unwrap();
                let scaled = SelectionProblem::new(
                    p.distances().clone(),
                    scaled_imp,
                    p.summary_size(),
                ).unwrap();
                prop_assert_eq!(greedy(&p, "s").selected, greedy(&scaled, "s").selected);
            }
        }
    }
}
