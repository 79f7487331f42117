mod support;

use proptest::prelude::*;
use support::kn_oracle::KnOracle;
use syneval::ngram::{train, TrainConfig};
use syneval::rng::SplitMix64;

const WORDS: &[&str] = &[
    "a", "b", "c", "d", "e", "f", "g", "h", "the", "dog", "saw", ".",
];

fn random_corpus(rng: &mut SplitMix64, max_tokens: usize, alphabet: usize) -> Vec<String> {
    let mut out = Vec::new();
    let mut n = 0;
    while n < max_tokens {
        let len = 1 + rng.below(8) as usize;
        let len = len.min(max_tokens - n);
        let s: Vec<&str> = (0..len)
            .map(|_| WORDS[rng.below(alphabet as u64) as usize])
            .collect();
        n += len;
        out.push(s.join(" "));
    }
    out
}

fn assert_close(a: f64, b: f64, what: &str) {
    assert!((a - b).abs() <= 1e-9, "{what}: {a} vs {b}");
}

#[test]
fn hand_worked_bigram() {
    let corpus = vec!["a b".to_string(), "a c".to_string()];
    let m = train(
        &corpus,
        TrainConfig {
            order: 2,
            unk_threshold: 1,
        },
    )
    .unwrap();
    let o = KnOracle::train(&corpus, 2, 1);
    assert!((m.prob(&["a"], "b") - 0.3).abs() < 1e-12);
    assert_close(o.prob(&["a"], "b"), 0.3, "oracle");
}

#[test]
fn randomized_corpora_match_the_oracle() {
    for case in 0..24u64 {
        let mut rng = SplitMix64::for_stream(2024, case);
        let order = 1 + (case % 5) as usize;
        let threshold = 1 + case % 3;
        let alphabet = 4 + rng.below(WORDS.len() as u64 - 3) as usize;
        let tokens = 200 + rng.below(800) as usize;
        let corpus = random_corpus(&mut rng, tokens, alphabet);
        let m = train(
            &corpus,
            TrainConfig {
                order,
                unk_threshold: threshold,
            },
        )
        .unwrap();
        let o = KnOracle::train(&corpus, order, threshold);

        for (k, (&dm, &d_o)) in m.discounts().iter().zip(&o.discounts).enumerate() {
            assert_close(dm, d_o, &format!("case {case} discount {}", k + 1));
        }
        let mut queries = WORDS[..alphabet].to_vec();
        queries.extend(["</s>", "<unk>", "unseen"]);
        for _ in 0..40 {
            let len = rng.below(order as u64 + 2) as usize;
            let mut ctx: Vec<&str> = (0..len)
                .map(|_| queries[rng.below(queries.len() as u64) as usize])
                .collect();
            if rng.below(3) == 0 {
                ctx.insert(0, "<s>");
            }
            for w in &queries {
                assert_close(
                    m.prob(&ctx, w),
                    o.prob(&ctx, w),
                    &format!("case {case} P({w} | {ctx:?})"),
                );
            }
        }
    }
}

#[test]
fn oracle_normalizes() {
    let mut rng = SplitMix64::new(5);
    let corpus = random_corpus(&mut rng, 500, 8);
    let o = KnOracle::train(&corpus, 3, 2);
    for ctx in [vec![], vec!["a"], vec!["<s>", "b"], vec!["c", "d", "e"]] {
        let total: f64 = o.predictable().iter().map(|w| o.prob(&ctx, w)).sum();
        assert_close(total, 1.0, "oracle sum");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn model_matches_oracle(
        seed in any::<u64>(),
        order in 1usize..=4,
        threshold in 1u64..=2,
        tokens in 20usize..400,
    ) {
        let mut rng = SplitMix64::new(seed);
        let corpus = random_corpus(&mut rng, tokens, 6);
        let m = train(&corpus, TrainConfig { order, unk_threshold: threshold });
        let m = match m {
            Ok(m) => m,
            // every type below the threshold
            Err(_) => return Ok(()),
        };
        let o = KnOracle::train(&corpus, order, threshold);
        for _ in 0..10 {
            let len = rng.below(5) as usize;
            let ctx: Vec<&str> = (0..len).map(|_| WORDS[rng.below(7) as usize]).collect();
            for w in WORDS.iter().take(7).chain(["</s>", "<unk>"].iter()) {
                let (a, b) = (m.prob(&ctx, w), o.prob(&ctx, w));
                prop_assert!((a - b).abs() <= 1e-9, "P({} | {:?}) = {} vs {}", w, ctx, a, b);
            }
        }
    }

    #[test]
    fn distributions_sum_to_one(seed in any::<u64>(), order in 1usize..=5) {
        let mut rng = SplitMix64::new(seed);
        let corpus = random_corpus(&mut rng, 600, 10);
        let m = train(&corpus, TrainConfig { order, unk_threshold: 2 }).unwrap();
        let len = rng.below(7) as usize;
        let ctx: Vec<&str> = (0..len).map(|_| WORDS[rng.below(11) as usize]).collect();
        let total: f64 = m.vocab().words().iter().map(|w| m.prob(&ctx, w)).sum();
        prop_assert!((total - 1.0).abs() <= 1e-9, "sum {} for {:?}", total, ctx);
    }

    #[test]
    fn only_the_last_tokens_matter(seed in any::<u64>(), order in 1usize..=5) {
        let mut rng = SplitMix64::new(seed);
        let corpus = random_corpus(&mut rng, 600, 10);
        let m = train(&corpus, TrainConfig { order, unk_threshold: 1 }).unwrap();
        let tail: Vec<&str> = (0..order - 1).map(|_| WORDS[rng.below(10) as usize]).collect();
        let mut a: Vec<&str> = (0..rng.below(6)).map(|_| WORDS[rng.below(12) as usize]).collect();
        let mut b: Vec<&str> = (0..rng.below(6)).map(|_| WORDS[rng.below(12) as usize]).collect();
        a.extend(&tail);
        b.extend(&tail);
        for w in WORDS {
            prop_assert_eq!(m.prob(&a, w).to_bits(), m.prob(&b, w).to_bits());
        }
    }
}
