use hmnd_core::group_crypto::{decrypt, encrypt, hom_mul, keygen, GroupParams};
use num_bigint::BigUint;
use proptest::prelude::*;

fn element(params: &GroupParams, k: u64) -> BigUint {
    params.exp_g(&BigUint::from(k))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn product_of_ciphertexts_decrypts_to_product(seed: u64, a in 1u64.., b in 1u64..) {
        let params = GroupParams::test_group();
        let mut rng = hmnd_core::seeded_rng(seed);
        let kp = keygen(&params, &mut rng);
        let (m1, m2) = (element(&params, a), element(&params, b));
        let c1 = encrypt(&params, &kp.pk, &m1, &mut rng).unwrap();
        let c2 = encrypt(&params, &kp.pk, &m2, &mut rng).unwrap();
        prop_assert_eq!(decrypt(&params, &kp.sk, &c1).unwrap(), m1.clone());
        let prod = hom_mul(&params, &c1, &c2).unwrap();
        prop_assert_eq!(decrypt(&params, &kp.sk, &prod).unwrap(), params.mul(&m1, &m2));
    }

    #[test]
    fn fresh_encryptions_differ(seed: u64, a in 1u64..) {
        let params = GroupParams::test_group();
        let mut rng = hmnd_core::seeded_rng(seed);
        let kp = keygen(&params, &mut rng);
        let m = element(&params, a);
        let c1 = encrypt(&params, &kp.pk, &m, &mut rng).unwrap();
        let c2 = encrypt(&params, &kp.pk, &m, &mut rng).unwrap();
        prop_assert_ne!(c1, c2);
    }
}
