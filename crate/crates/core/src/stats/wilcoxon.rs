//! Two-sided Wilcoxon signed-rank test on paired differences.

use serde::Serialize;
use statrs::function::erf::erfc;

use super::StatsError;

/// Largest n (after dropping zeros) for which the exact null is used.
pub const EXACT_MAX_N: usize = 25;
/// Minimum number of non-zero differences.
pub const MIN_PAIRS: usize = 5;
/// Relative tolerance under which two |d| values count as tied and a
/// difference counts as zero.
pub const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PMethod {
    Exact,
    Normal,
    /// All differences were zero.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WilcoxonResult {
    pub n_total: usize,
    pub n_used: usize,
    pub n_zeros: usize,
    /// Number of |d| groups with more than one member.
    pub n_tie_groups: usize,
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    pub p_value: f64,
    pub method: PMethod,
}

/// Midranks of `|d|` (ascending), with relative-tolerance tie grouping.
/// Returns doubled ranks (integers) and the tie group sizes.
pub(crate) fn doubled_midranks(abs: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let n = abs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0u64; n];
    let mut groups = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        let base = abs[order[i]];
        while j < n && abs[order[j]] - base <= TIE_TOLERANCE * abs[order[j]] {
            j += 1;
        }
        // Ranks i+1..=j have mean (i+1+j)/2; doubled: i+1+j.
        for &k in &order[i..j] {
            ranks[k] = (i + 1 + j) as u64;
        }
        groups.push(j - i);
        i = j;
    }
    (ranks, groups)
}

/// Null distribution counts of the doubled W+ statistic: `counts[s]` is the
/// number of sign patterns whose positive doubled ranks sum to s.
pub(crate) fn exact_counts(doubled: &[u64]) -> Vec<u64> {
    let total: u64 = doubled.iter().sum();
    let mut counts = vec![0u64; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

pub(crate) fn two_sided_from_counts(counts: &[u64], observed: u64, n: usize) -> f64 {
    let obs = observed as usize;
    let le: u64 = counts[..=obs].iter().sum();
    let ge: u64 = counts[obs..].iter().sum();
    let p = 2.0 * le.min(ge) as f64 / 2f64.powi(n as i32);
    p.min(1.0)
}

pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<WilcoxonResult, StatsError> {
    if diffs.iter().any(|d| !d.is_finite()) {
        return Err(StatsError::Parameter("non-finite paired difference".into()));
    }
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let kept: Vec<f64> = diffs
        .iter()
        .copied()
        .filter(|d| d.abs() > TIE_TOLERANCE * scale)
        .collect();
    let n_zeros = diffs.len() - kept.len();
    let n = kept.len();
    if n == 0 {
        return Ok(WilcoxonResult {
            n_total: diffs.len(),
            n_used: 0,
            n_zeros,
            n_tie_groups: 0,
            w_plus: 0.0,
            p_value: 1.0,
            method: PMethod::Degenerate,
        });
    }
    if n < MIN_PAIRS {
        return Err(StatsError::Parameter(format!(
            "{n} non-zero differences; at least {MIN_PAIRS} required"
        )));
    }
    let abs: Vec<f64> = kept.iter().map(|d| d.abs()).collect();
    let (doubled, groups) = doubled_midranks(&abs);
    let w2: u64 = kept
        .iter()
        .zip(&doubled)
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| r)
        .sum();
    let w_plus = w2 as f64 / 2.0;
    let n_tie_groups = groups.iter().filter(|&&g| g > 1).count();

    let (p_value, method) = if n <= EXACT_MAX_N {
        (two_sided_from_counts(&exact_counts(&doubled), w2, n), PMethod::Exact)
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie: f64 = groups.iter().map(|&t| (t * t * t - t) as f64).sum();
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie / 48.0;
        let dev = ((w_plus - mean).abs() - 0.5).max(0.0);
        let z = dev / var.sqrt();
        ((erfc(z / std::f64::consts::SQRT_2)).min(1.0), PMethod::Normal)
    };
    Ok(WilcoxonResult {
        n_total: diffs.len(),
        n_used: n,
        n_zeros,
        n_tie_groups,
        w_plus,
        p_value,
        method,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    // Independent oracle: enumerate all 2^n sign patterns over the midranks.
    fn brute_force(diffs: &[f64]) -> f64 {
        let n = diffs.len();
        // Doubled midrank: 2·#smaller + #equal (self included) + 1.
        let doubled: Vec<u64> = (0..n)
            .map(|i| {
                let a = diffs[i].abs();
                let less = diffs.iter().filter(|d| d.abs() < a).count() as u64;
                let eq = diffs.iter().filter(|d| d.abs() == a).count() as u64;
                2 * less + eq + 1
            })
            .collect();
        let obs: u64 = (0..n).filter(|&i| diffs[i] > 0.0).map(|i| doubled[i]).sum();
        let (mut le, mut ge) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            let s: u64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| doubled[i]).sum();
            le += (s <= obs) as u64;
            ge += (s >= obs) as u64;
        }
        (2.0 * le.min(ge) as f64 / 2f64.powi(n as i32)).min(1.0)
    }

    #[test]
    fn five_positive() {
        let r = wilcoxon_signed_rank(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(r.p_value, 0.0625);
        assert_eq!(r.method, PMethod::Exact);
        assert_eq!(r.w_plus, 15.0);
    }

    #[test]
    fn antisymmetric_is_one() {
        let d = [1.5, -1.5, 2.0, -2.0, 3.1, -3.1, 0.7, -0.7];
        assert!((wilcoxon_signed_rank(&d).unwrap().p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_is_degenerate() {
        let r = wilcoxon_signed_rank(&[0.0; 6]).unwrap();
        assert_eq!(r.method, PMethod::Degenerate);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.n_zeros, 6);
    }

    #[test]
    fn zeros_dropped_and_counted() {
        let r = wilcoxon_signed_rank(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 0.0]).unwrap();
        assert_eq!((r.n_zeros, r.n_used), (2, 5));
        assert_eq!(r.p_value, 0.0625);
    }

    #[test]
    fn too_few_pairs() {
        assert!(matches!(wilcoxon_signed_rank(&[1.0, 2.0]), Err(StatsError::Parameter(_))));
    }

    #[test]
    fn float_noise_ties_are_grouped() {
        // 0.1 + 0.2 and 0.3 differ in the last ulp but are one tie group.
        let d = [0.1 + 0.2, -0.3, 1.0, 2.0, 3.0];
        let r = wilcoxon_signed_rank(&d).unwrap();
        assert_eq!(r.n_tie_groups, 1);
        assert_eq!(r.w_plus, 1.5 + 3.0 + 4.0 + 5.0);
    }

    #[test]
    fn exact_matches_enumeration_fixed_corpus() {
        let corpus: [&[f64]; 6] = [
            &[1.2, -0.4, 3.3, 0.8, -2.1],
            &[0.5, 0.5, -0.5, 1.0, 2.0, -3.0, 0.25],
            &[-4.0, -3.0, -2.0, -1.0, 5.0, 6.0, 0.1, -0.2, 0.3],
            &[2.0, 2.0, 2.0, -2.0, 1.0, 1.0, -1.0, 3.5, 4.5, -0.5, 0.75, 6.0],
            &[0.31, -0.12, 0.44, 0.05, -0.61, 0.27, 0.18, 0.9, -0.02, 0.33, 0.41],
            &[-1.0, -2.0, -3.0, -4.0, -5.0, -6.0],
        ];
        for d in corpus {
            assert_eq!(wilcoxon_signed_rank(d).unwrap().p_value, brute_force(d), "{d:?}");
        }
    }

    #[test]
    fn normal_path_is_close_to_exact_at_crossover() {
        // n = 30 shifted pairs: compare the approximation to the exact DP.
        let d: Vec<f64> = (1..=30).map(|i| (i as f64) * if i % 3 == 0 { -1.0 } else { 1.0 } + 0.01 * i as f64).collect();
        let approx = wilcoxon_signed_rank(&d).unwrap();
        assert_eq!(approx.method, PMethod::Normal);
        let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
        let (dr, _) = doubled_midranks(&abs);
        let w2: u64 = d.iter().zip(&dr).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
        let exact = two_sided_from_counts(&exact_counts(&dr), w2, d.len());
        assert!((approx.p_value - exact).abs() < 5e-3, "{} vs {}", approx.p_value, exact);
    }

    proptest! {
        #[test]
        fn exact_equals_brute_force(d in prop::collection::vec(
            prop_oneof![(-50i32..50).prop_map(|v| v as f64 / 4.0), -10.0f64..10.0], 5..=12)) {
            prop_assume!(d.iter().filter(|x| **x != 0.0).count() == d.len());
            prop_assert_eq!(wilcoxon_signed_rank(&d).unwrap().p_value, brute_force(&d));
        }

        #[test]
        fn positive_scaling_invariant(d in prop::collection::vec(-10.0f64..10.0, 5..60), c in 1e-3f64..1e3) {
            prop_assume!(d.iter().all(|x| x.abs() > 1e-6));
            let scaled: Vec<f64> = d.iter().map(|x| x * c).collect();
            let a = wilcoxon_signed_rank(&d).unwrap();
            let b = wilcoxon_signed_rank(&scaled).unwrap();
            prop_assert_eq!(a.w_plus, b.w_plus);
            prop_assert!((a.p_value - b.p_value).abs() <= 1e-15);
        }

        #[test]
        fn p_is_a_probability(d in prop::collection::vec(-10.0f64..10.0, 5..60)) {
            if let Ok(r) = wilcoxon_signed_rank(&d) {
                prop_assert!(r.p_value > 0.0 && r.p_value <= 1.0);
            }
        }
    }
}
