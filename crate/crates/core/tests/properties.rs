//! Property tests over the core invariants: book validity, matching
//! conservation, simplex closure, and numeric hygiene.

use proptest::prelude::*;

use hiertrade::accounting::{drift, PortfolioState, PortfolioWeights, PriceVector};
use hiertrade::eval::simplex_project;
use hiertrade::exchange::{match_limit_order, LimitOrderAction, OrderBook};
use hiertrade::market::{gen_synthetic_market, LobLevel, LobSnapshot, SyntheticMarketConfig};
use hiertrade::nn::Mlp;

fn book_strategy() -> impl Strategy<Value = LobSnapshot> {
    (2.0f64..500.0, 1usize..=8, 0.01f64..0.5).prop_flat_map(|(mid, depth, tick)| {
        (
            proptest::collection::vec(1.0f64..1000.0, depth),
            proptest::collection::vec(1.0f64..1000.0, depth),
        )
            .prop_map(move |(bid_vols, ask_vols)| LobSnapshot {
                step: 0,
                bids: bid_vols
                    .iter()
                    .enumerate()
                    .map(|(l, v)| LobLevel { price: mid - tick * (0.5 + l as f64), volume: *v })
                    .collect(),
                asks: ask_vols
                    .iter()
                    .enumerate()
                    .map(|(l, v)| LobLevel { price: mid + tick * (0.5 + l as f64), volume: *v })
                    .collect(),
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn matching_conserves_volume_and_respects_the_limit(
        snap in book_strategy(),
        qty in -2000.0f64..2000.0,
        price_frac in -1.5f64..1.5,
    ) {
        prop_assume!(snap.validate().is_ok());
        let span = snap.asks.last().unwrap().price - snap.bids.last().unwrap().price;
        let price = snap.mid() + price_frac * span;
        prop_assume!(price > 0.0);
        let mut book = OrderBook::from_snapshot(&snap);
        let before: f64 = book.bids.iter().chain(book.asks.iter()).map(|l| l.volume).sum();
        let order = LimitOrderAction::new(price, qty).unwrap();
        let fill = match_limit_order(&mut book, &order);
        let after: f64 = book.bids.iter().chain(book.asks.iter()).map(|l| l.volume).sum();

        // Volume removed from the book equals the executed quantity.
        prop_assert!((before - after - fill.executed).abs() < 1e-9);
        // Executed never exceeds the requested quantity.
        prop_assert!(fill.executed <= qty.abs() + 1e-12);
        // Every partial fill respects the limit price.
        for (p, q) in &fill.fills {
            prop_assert!(*q > 0.0);
            if qty > 0.0 {
                prop_assert!(*p <= price + 1e-12);
            } else {
                prop_assert!(*p >= price - 1e-12);
            }
        }
        // The weighted average matches the partials.
        if fill.executed > 0.0 {
            let vwap: f64 =
                fill.fills.iter().map(|(p, q)| p * q).sum::<f64>() / fill.executed;
            prop_assert!((fill.avg_price.unwrap() - vwap).abs() < 1e-12);
        } else {
            prop_assert!(fill.avg_price.is_none());
        }
    }

    #[test]
    fn drift_preserves_the_simplex(
        raw in proptest::collection::vec(0.01f64..1.0, 2..6),
        value in 1.0f64..1e7,
        moves in proptest::collection::vec(0.5f64..2.0, 5),
    ) {
        let total: f64 = raw.iter().sum();
        let weights = PortfolioWeights::new(raw.iter().map(|x| x / total).collect()).unwrap();
        let m = weights.assets();
        let prices: Vec<f64> = (0..m).map(|i| 10.0 * (i + 1) as f64).collect();
        let state = PortfolioState::new(
            weights,
            value,
            PriceVector::from_assets(&prices).unwrap(),
            0,
        ).unwrap();
        let next: Vec<f64> = prices.iter().enumerate().map(|(i, p)| p * moves[i % moves.len()]).collect();
        let (v, w) = drift(&state, &PriceVector::from_assets(&next).unwrap()).unwrap();
        prop_assert!(v > 0.0);
        let sum: f64 = w.as_slice().iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(w.as_slice().iter().all(|x| *x >= 0.0));
    }

    #[test]
    fn simplex_projection_lands_on_the_simplex(
        v in proptest::collection::vec(-5.0f64..5.0, 1..8),
    ) {
        let p = simplex_project(&v);
        let sum: f64 = p.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|x| *x >= 0.0));
        // Projection is idempotent.
        let pp = simplex_project(&p);
        for (a, b) in p.iter().zip(&pp) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn finite_inputs_never_produce_non_finite_outputs(
        seed in 0u64..1000,
        input in proptest::collection::vec(-1e3f64..1e3, 4),
    ) {
        let net = Mlp::new(&[4, 16, 3], seed).unwrap();
        let trace = net.forward_trace(&input).unwrap();
        prop_assert!(trace.output().iter().all(|x| x.is_finite()));
        let tape = net.backward(&trace, &[1.0, -1.0, 0.5]).unwrap();
        prop_assert!(tape.is_finite());
    }
}

#[test]
fn generated_books_are_valid_over_ten_thousand_snapshots() {
    let mut checked = 0usize;
    for seed in 0..4u64 {
        let config = SyntheticMarketConfig {
            assets: 2,
            days: 100,
            steps_per_day: 16,
            seed,
            drift: vec![0.002, -0.002],
            volatility: vec![0.05, 0.12],
            ..Default::default()
        };
        let (_, books) = gen_synthetic_market(&config).unwrap();
        for series in &books {
            for snap in series.snapshots() {
                snap.validate().unwrap();
                checked += 1;
            }
        }
    }
    assert!(checked >= 10_000, "checked only {checked} snapshots");
}
