use hmnd_core::decimal::parse_rational;
use hmnd_core::fees::{perpetual_cost, perpetual_cost_partial_sum, quote_transaction, PriceQuote, QuoteFixture};
use hmnd_core::Rational;
use serde::Deserialize;

#[derive(Deserialize)]
struct Golden {
    size_gb: String,
    validators: u32,
    computational: u128,
    storage_perpetual: u128,
    total: u128,
}

#[test]
fn bundled_quote_breakdowns() {
    let fixture = QuoteFixture::from_json(include_str!("../../../fixtures/quotes.json")).unwrap();
    let quote: PriceQuote<Rational> = PriceQuote::from_fixture(&fixture).unwrap();
    let d = parse_rational("0.3057").unwrap();
    let golden: Vec<Golden> = serde_json::from_str(include_str!("fixtures/fee_breakdowns.json")).unwrap();
    for g in golden {
        let b = quote_transaction(&quote, &g.size_gb, g.validators, &d).unwrap();
        assert_eq!((b.computational, b.storage_perpetual, b.total), (g.computational, g.storage_perpetual, g.total), "{}", g.size_gb);
    }
}

#[test]
fn perpetual_multiplier() {
    let closed = perpetual_cost(1.0f64, 0.3057).unwrap();
    assert!((closed - 3.2712).abs() / 3.2712 < 1e-4);
    let partial = perpetual_cost_partial_sum(1.0f64, 0.3057, 200).unwrap();
    assert!((closed - partial).abs() / closed < 1e-9);
}
