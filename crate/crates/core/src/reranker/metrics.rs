//! DCG / NDCG with exponential gain `2^g - 1` and `1 / log2(rank + 1)` discount.

/// Discount of a 1-based rank; zero past the cutoff.
#[inline]
pub fn discount(rank: usize, cutoff: usize) -> f64 {
    if rank == 0 || rank > cutoff {
        0.0
    } else {
        1.0 / ((rank + 1) as f64).log2()
    }
}

#[inline]
pub fn gain(grade: u32) -> f64 {
    2f64.powi(grade as i32) - 1.0
}

pub fn dcg(grades_in_rank_order: &[u32], cutoff: usize) -> f64 {
    grades_in_rank_order
        .iter()
        .take(cutoff)
        .enumerate()
        .map(|(i, &g)| gain(g) * discount(i + 1, cutoff))
        .sum()
}

pub fn ideal_dcg(grades: &[u32], cutoff: usize) -> f64 {
    let mut sorted = grades.to_vec();
    sorted.sort_unstable_by(|a, b| b.cmp(a));
    dcg(&sorted, cutoff)
}

/// NDCG@cutoff; 1.0 when every grade is zero.
pub fn ndcg(grades_in_rank_order: &[u32], cutoff: usize) -> f64 {
    let ideal = ideal_dcg(grades_in_rank_order, cutoff);
    if ideal == 0.0 {
        1.0
    } else {
        dcg(grades_in_rank_order, cutoff) / ideal
    }
}

/// Absolute NDCG change from swapping rows `i` and `j`, where `ranks[r]` is
/// the current 1-based rank of row `r`.
pub fn delta_ndcg(grades: &[u32], ranks: &[usize], i: usize, j: usize, cutoff: usize) -> f64 {
    let ideal = ideal_dcg(grades, cutoff);
    delta_ndcg_with_ideal(grades[i], grades[j], ranks[i], ranks[j], cutoff, ideal)
}

#[inline]
pub(crate) fn delta_ndcg_with_ideal(
    gi: u32,
    gj: u32,
    ri: usize,
    rj: usize,
    cutoff: usize,
    ideal: f64,
) -> f64 {
    if ideal == 0.0 || gi == gj {
        return 0.0;
    }
    (gain(gi) - gain(gj)).abs() * (discount(ri, cutoff) - discount(rj, cutoff)).abs() / ideal
}

/// Row indices ordered by score descending; equal scores keep row order.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// 1-based rank of every row under [`rank_order`].
pub fn ranks_of(scores: &[f64]) -> Vec<usize> {
    let mut ranks = vec![0; scores.len()];
    for (pos, row) in rank_order(scores).into_iter().enumerate() {
        ranks[row] = pos + 1;
    }
    ranks
}

/// NDCG@cutoff of the ranking induced by `scores`.
pub fn ndcg_of_scores(grades: &[u32], scores: &[f64], cutoff: usize) -> f64 {
    let ordered: Vec<u32> = rank_order(scores).into_iter().map(|r| grades[r]).collect();
    ndcg(&ordered, cutoff)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dcg_examples() {
        assert_eq!(dcg(&[4], 1), 15.0);
        assert_eq!(dcg(&[0, 0, 0], 3), 0.0);
        let v = dcg(&[3, 1], 2);
        assert!((v - (7.0 + 1.0 / 3f64.log2())).abs() < 1e-12);
        assert!((v - 7.6309).abs() < 1e-4);
    }

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg(&[4, 3, 1, 0], 4), 1.0);
        assert_eq!(ndcg(&[0, 0], 2), 1.0);
        let v = ndcg(&[1, 3], 2);
        let expect = (1.0 + 7.0 / 3f64.log2()) / (7.0 + 1.0 / 3f64.log2());
        assert!((v - expect).abs() < 1e-12);
        assert!((v - 0.709_810).abs() < 1e-6);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_ndcg(&[2, 2], &[1, 2], 0, 1, 2), 0.0);
        // both beyond the cutoff
        assert_eq!(delta_ndcg(&[3, 0, 1, 2], &[1, 2, 3, 4], 2, 3, 2), 0.0);
        let d = delta_ndcg(&[3, 0], &[1, 2], 0, 1, 2);
        assert!((d - 7.0 * (1.0 - 1.0 / 3f64.log2()) / 7.0).abs() < 1e-12);
        assert!((d - 0.3691).abs() < 1e-4);
    }

    #[test]
    fn ranks_break_ties_by_row() {
        assert_eq!(ranks_of(&[1.0, 3.0, 1.0, 2.0]), vec![3, 1, 4, 2]);
    }
}
