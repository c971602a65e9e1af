//! Unit-cost Levenshtein distance, shared by subtitle regrouping (characters)
//! and WER (gloss tokens).

/// Edit distance between two sequences with unit insert/delete/substitute
/// costs. Two-row dynamic program, `O(|a|·|b|)` time.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    levenshtein(&a, &b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::HashMap;

    fn memo(a: &[char], b: &[char], i: usize, j: usize, m: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&v) = m.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            memo(a, b, i + 1, j + 1, m)
        } else {
            1 + memo(a, b, i + 1, j, m)
                .min(memo(a, b, i, j + 1, m))
                .min(memo(a, b, i + 1, j + 1, m))
        };
        m.insert((i, j), v);
        v
    }

    fn oracle(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        memo(&a, &b, 0, 0, &mut HashMap::new())
    }

    #[test]
    fn examples() {
        assert_eq!(edit_distance("", "abc"), 3);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("天氣", "天氣"), 0);
        assert_eq!(edit_distance("天氣", "天"), 1);
        assert_eq!(levenshtein::<u8>(&[], &[]), 0);
    }

    proptest! {
        #[test]
        fn matches_recursive_oracle(a in "[ab天氣]{0,8}", b in "[ab天氣]{0,8}") {
            prop_assert_eq!(edit_distance(&a, &b), oracle(&a, &b));
        }

        #[test]
        fn metric_axioms(a in "[abc]{0,8}", b in "[abc]{0,8}", c in "[abc]{0,8}") {
            let ab = edit_distance(&a, &b);
            prop_assert_eq!(ab, edit_distance(&b, &a));
            prop_assert_eq!(ab == 0, a == b);
            prop_assert!(edit_distance(&a, &c) <= ab + edit_distance(&b, &c));
        }
    }
}
