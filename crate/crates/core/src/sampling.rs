//! Deterministic low-discrepancy points (Halton sequence).

const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut factor = inv;
    let mut acc = 0.0;
    while index > 0 {
        acc += (index % base) as f64 * factor;
        index /= base;
        factor *= inv;
    }
    acc
}

/// Halton point `index` in `[0,1)^dim`. Dimensions beyond 16 reuse primes
/// with a scrambled index, which is adequate for the lattice checks here.
pub fn halton(index: u64, dim: usize) -> Vec<f64> {
    (0..dim)
        .map(|d| {
            let base = PRIMES[d % PRIMES.len()];
            let idx = index + (d / PRIMES.len()) as u64 * 7919;
            radical_inverse(idx, base)
        })
        .collect()
}

/// `count` equispaced values covering `[lo, hi]` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.5 * (lo + hi)],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radical_inverse_base_two() {
        assert_eq!(radical_inverse(1, 2), 0.5);
        assert_eq!(radical_inverse(2, 2), 0.25);
        assert_eq!(radical_inverse(3, 2), 0.75);
        assert!((radical_inverse(1, 3) - 1.0 / 3.0).abs() < 1e-16);
    }

    #[test]
    fn linspace_endpoints() {
        let v = linspace(-1.0, 1.0, 5);
        assert_eq!(v, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(linspace(0.0, 2.0, 1), vec![1.0]);
    }
}
