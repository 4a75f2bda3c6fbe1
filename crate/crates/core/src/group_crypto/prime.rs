//! Seeded probabilistic primality testing and safe-prime search.

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, ToPrimitive, Zero};
use rand::RngCore;

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Witness set that makes Miller-Rabin deterministic below 3.3 * 10^24.
const DETERMINISTIC_BASES: [u32; 13] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41];

const RANDOM_ROUNDS: usize = 40;

/// Miller-Rabin. Deterministic for `n < 2^64`, otherwise [`RANDOM_ROUNDS`]
/// random bases drawn from `rng` on top of the fixed witness set.
pub fn is_probable_prime<R: RngCore + ?Sized>(n: &BigUint, rng: &mut R) -> bool {
    if n < &BigUint::from(2u8) {
        return false;
    }
    for p in SMALL_PRIMES {
        let p = BigUint::from(p);
        if *n == p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let one = BigUint::one();
    let n_minus_one = n - &one;
    let s = n_minus_one.trailing_zeros().unwrap_or(0);
    let d = &n_minus_one >> s;

    let witness = |a: &BigUint| -> bool {
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_one {
            return true;
        }
        for _ in 1..s {
            x = x.modpow(&BigUint::from(2u8), n);
            if x == n_minus_one {
                return true;
            }
            if x == one {
                return false;
            }
        }
        false
    };

    if !DETERMINISTIC_BASES.iter().all(|&a| witness(&BigUint::from(a))) {
        return false;
    }
    if n.bits() <= 64 {
        return true;
    }
    let two = BigUint::from(2u8);
    (0..RANDOM_ROUNDS).all(|_| {
        let a = rng.gen_biguint_range(&two, &n_minus_one);
        witness(&a)
    })
}

/// Returns a safe prime `p = 2q + 1` with exactly `bits` bits, and `q`.
pub fn random_safe_prime<R: RngCore + ?Sized>(bits: u64, rng: &mut R) -> (BigUint, BigUint) {
    assert!(bits >= 3, "safe primes need at least 3 bits");
    loop {
        // q has bits-1 bits with the top bit set, so p = 2q+1 has exactly `bits` bits.
        let mut q = rng.gen_biguint(bits - 1);
        q.set_bit(bits - 2, true);
        q.set_bit(0, true);
        if !quick_sieve(&q) {
            continue;
        }
        let p = (&q << 1u32) + 1u32;
        if !quick_sieve(&p) {
            continue;
        }
        if is_probable_prime(&q, rng) && is_probable_prime(&p, rng) {
            return (p, q);
        }
    }
}

fn quick_sieve(n: &BigUint) -> bool {
    SMALL_PRIMES.iter().all(|&p| {
        let r = (n % p).to_u32().unwrap_or(1);
        r != 0 || *n == BigUint::from(p)
    })
}
