mod common;

use proptest::prelude::*;
use utilrank::corpus::{Document, Index, Query};
use utilrank::features::{FeatureExtractor, FeatureConfig, FeatureVector, NUM_FEATURES};
use utilrank::pipeline::{evaluate, format_trec_run, paired_t_test, InferenceEntry, Prediction};
use utilrank::reranker::metrics::{delta_ndcg, ranks_of};
use utilrank::reranker::{lambda_pairs, rerank, LambdaParams, LinearRanker, Standardization};
use utilrank::topics::{top_topic_coverage, topic_cosine, train_lda, LdaConfig, TopicDistribution};
use utilrank::utility::{accuracy, f1_score, normalize_answer};

const WORDS: [&str; 8] = ["ant", "bee", "cat", "dog", "eel", "fox", "gnu", "hen"];

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(&WORDS[..]), 0..12).prop_map(|w| w.join(" "))
}

fn corpus() -> impl Strategy<Value = Vec<Document>> {
    prop::collection::vec(text(), 1..12).prop_map(|texts| {
        texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| Document::new(format!("d{i:02}"), t))
            .collect()
    })
}

fn distribution(m: usize) -> impl Strategy<Value = TopicDistribution> {
    prop::collection::vec(0.01f64..1.0, m).prop_map(|v| {
        let s: f64 = v.iter().sum();
        TopicDistribution::new(v.into_iter().map(|x| x / s).collect()).unwrap()
    })
}

fn grades_and_scores() -> impl Strategy<Value = (Vec<u32>, Vec<f64>)> {
    (1usize..10).prop_flat_map(|n| {
        (
            prop::collection::vec(0u32..=4, n),
            prop::collection::vec((0u8..6).prop_map(|s| f64::from(s) * 0.5), n),
        )
    })
}

proptest! {
    #[test]
    fn retrieval_matches_brute_force(docs in corpus(), q in text(), n in 0usize..15) {
        let index = Index::build(docs.clone()).unwrap();
        let query = Query::new("q", q);
        let mut all: Vec<(String, f64)> = docs
            .iter()
            .map(|d| (d.doc_id.clone(), index.bm25_score(&query, &d.doc_id).unwrap()))
            .filter(|(_, s)| *s > 0.0)
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        all.truncate(n);
        prop_assert_eq!(index.retrieve(&query, n), all);
    }

    #[test]
    fn retrieval_is_prefix_closed(docs in corpus(), q in text(), n in 0usize..8, extra in 0usize..8) {
        let index = Index::build(docs).unwrap();
        let query = Query::new("q", q);
        let short = index.retrieve(&query, n);
        let long = index.retrieve(&query, n + extra);
        prop_assert_eq!(&long[..short.len()], &short[..]);
    }

    #[test]
    fn more_matches_score_higher(len in 5usize..30, tf in 1usize..5) {
        prop_assume!(tf < len);
        // same length, one more occurrence of the query term
        let filler = |k: usize| vec!["zz"; k].join(" ");
        let with = |t: usize| format!("{} {}", vec!["cat"; t].join(" "), filler(len - t.min(len)));
        let docs = vec![
            Document::new("a", with(tf)),
            Document::new("b", with(tf + 1)),
            Document::new("c", "other words entirely"),
        ];
        let index = Index::build(docs).unwrap();
        let q = Query::new("q", "cat");
        prop_assert!(index.bm25_score(&q, "b").unwrap() > index.bm25_score(&q, "a").unwrap());
    }

    #[test]
    fn idf_decreases_with_document_frequency(n in 2usize..30, df in 0usize..29) {
        prop_assume!(df < n);
        let docs: Vec<Document> = (0..n)
            .map(|i| {
                let mut t = String::from("base");
                if i < df { t.push_str(" x"); }
                if i <= df { t.push_str(" y"); }
                Document::new(format!("d{i}"), t)
            })
            .collect();
        let index = Index::build(docs).unwrap();
        prop_assert!(index.idf("x") > index.idf("y"));
        prop_assert!(index.idf("y") > 0.0);
    }

    #[test]
    fn coverage_grows_with_a(q in distribution(8), d in distribution(8)) {
        let mut prev = 0.0;
        for a in 1..=8 {
            let c = top_topic_coverage(&q, &d, a).unwrap();
            prop_assert!(c + 1e-12 >= prev);
            prev = c;
        }
        prop_assert!((prev - 1.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_is_symmetric_and_bounded(a in distribution(6), b in distribution(6)) {
        let ab = topic_cosine(&a, &b).unwrap();
        prop_assert_eq!(ab, topic_cosine(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
    }

    #[test]
    fn delta_ndcg_matches_recomputation((grades, scores) in grades_and_scores(), cutoff in 1usize..10) {
        let ranks = ranks_of(&scores);
        for i in 0..grades.len() {
            for j in 0..grades.len() {
                let fast = delta_ndcg(&grades, &ranks, i, j, cutoff);
                let slow = common::brute_delta(&grades, &scores, i, j, cutoff);
                prop_assert!((fast - slow).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn lambdas_sum_to_zero((grades, scores) in grades_and_scores(), sigma in 0.1f64..3.0, outer: bool) {
        let p = LambdaParams { sigma, cutoff: 5, sigma_outer: outer };
        let (l, h) = lambda_pairs(&grades, &scores, &p);
        prop_assert!(l.iter().sum::<f64>().abs() <= 1e-9);
        prop_assert!(h.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rerank_ignores_score_shift(
        w in prop::collection::vec(-1.0f64..1.0, NUM_FEATURES),
        xs in prop::collection::vec(prop::collection::vec(0.0f64..5.0, NUM_FEATURES), 0..10),
        shift in -100.0f64..100.0,
    ) {
        let weights: [f64; NUM_FEATURES] = w.try_into().unwrap();
        let base = LinearRanker { weights, bias: 0.0, standardization: Standardization::identity() };
        let shifted = LinearRanker { bias: shift, ..base.clone() };
        let cands: Vec<(String, FeatureVector)> = xs
            .into_iter()
            .enumerate()
            .map(|(i, x)| (format!("d{i}"), FeatureVector::from_slice(&x).unwrap()))
            .collect();
        let ids = |r: Vec<(String, f64)>| r.into_iter().map(|p| p.0).collect::<Vec<_>>();
        // a shift can only merge scores through rounding, so skip near-ties
        let scores: Vec<f64> = cands.iter().map(|(_, x)| base.score(x)).collect();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-9 || w[1] == w[0]));
        prop_assert_eq!(ids(rerank(&base, &cands)), ids(rerank(&shifted, &cands)));
    }

    #[test]
    fn normalization_is_idempotent(s in "[a-zA-Z .,!?'-]{0,30}") {
        let once = normalize_answer(&s);
        prop_assert_eq!(normalize_answer(&once), once.clone());
        prop_assert_eq!(f1_score(&s, std::slice::from_ref(&once)).unwrap(), f1_score(&once, std::slice::from_ref(&once)).unwrap());
        prop_assert_eq!(accuracy(&s, &[s.to_uppercase()]).unwrap(), 1.0);
    }

    #[test]
    fn evaluate_is_symmetric(answers in prop::collection::vec((0u8..3, 0u8..3), 2..15)) {
        let golds: Vec<Query> = (0..answers.len())
            .map(|i| Query::with_answers(format!("q{i}"), "?", vec!["yes".into()]))
            .collect();
        let say = |k: u8| ["yes", "no", "yes indeed"][k as usize].to_string();
        let mk = |pick: &dyn Fn(&(u8, u8)) -> u8| -> Vec<Prediction> {
            answers.iter().enumerate().map(|(i, a)| Prediction {
                query_id: format!("q{i}"), answer: say(pick(a)), error: None,
            }).collect()
        };
        let a = mk(&|x| x.0);
        let b = mk(&|x| x.1);
        let ab = evaluate(&[("a", &a), ("b", &b)], &golds).unwrap();
        let ba = evaluate(&[("b", &b), ("a", &a)], &golds).unwrap();
        for (x, y) in ab.significance.iter().zip(&ba.significance) {
            prop_assert_eq!(x.test.t_statistic, -y.test.t_statistic);
            prop_assert_eq!(x.test.p_value, y.test.p_value);
        }
    }

    #[test]
    fn t_test_matches_statrs(a in prop::collection::vec(-5.0f64..5.0, 2..40), noise in prop::collection::vec(-3.0f64..3.0, 40)) {
        use statrs::distribution::{ContinuousCDF, StudentsT};
        let b: Vec<f64> = a.iter().zip(&noise).map(|(x, e)| x + e).collect();
        let r = paired_t_test(&a, &b);
        prop_assume!(r.t_statistic.is_finite());
        let dist = StudentsT::new(0.0, 1.0, r.df).unwrap();
        let expect = 2.0 * (1.0 - dist.cdf(r.t_statistic.abs()));
        prop_assert!((r.p_value - expect).abs() < 1e-9, "{} vs {}", r.p_value, expect);
    }

    #[test]
    fn trec_lines_are_rank_ordered(scores in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 0..8), 1..5)) {
        let entries: Vec<InferenceEntry> = scores
            .into_iter()
            .enumerate()
            .map(|(q, s)| {
                let mut ranked: Vec<(String, f64)> =
                    s.into_iter().enumerate().map(|(d, v)| (format!("d{d}"), v)).collect();
                utilrank::corpus::sort_ranked(&mut ranked);
                InferenceEntry {
                    prediction: Prediction { query_id: format!("q{q}"), answer: String::new(), error: None },
                    ranked,
                    context: Vec::new(),
                }
            })
            .collect();
        let run = format_trec_run(&entries, "tag");
        let mut last: Option<(String, usize, f64)> = None;
        for line in run.lines() {
            let f: Vec<&str> = line.split(' ').collect();
            prop_assert_eq!(f.len(), 6);
            prop_assert_eq!(f[1], "Q0");
            let (q, rank, score) = (f[0].to_string(), f[3].parse::<usize>().unwrap(), f[4].parse::<f64>().unwrap());
            if let Some((lq, lr, ls)) = &last {
                if *lq == q {
                    prop_assert_eq!(rank, lr + 1);
                    prop_assert!(score <= *ls);
                } else {
                    prop_assert_eq!(rank, 1);
                }
            }
            last = Some((q, rank, score));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn feature_invariants(docs in corpus(), q in text()) {
        let index = Index::build(docs.clone()).unwrap();
        let lda = train_lda(&docs, &LdaConfig { num_topics: 3, iterations: 10, ..LdaConfig::default() }).unwrap();
        let ex = FeatureExtractor::new(&index, &lda, FeatureConfig { topic_a: 2, fold_in_iterations: 5 }).unwrap();
        let query = Query::new("q", q);
        for d in &docs {
            let f = ex.extract(&query, d).unwrap();
            let v = |k: usize| f.get(k);
            prop_assert!(v(1) >= v(2) && v(2) >= 0.0);
            prop_assert!(v(6) >= v(7) && v(7) >= 0.0);
            if v(1) > 0.0 {
                prop_assert!(v(3) <= v(5) + 1e-12 && v(5) <= v(4) + 1e-12);
            }
            if v(6) > 0.0 {
                prop_assert!(v(8) <= v(10) + 1e-12 && v(10) <= v(9) + 1e-12);
            }
            prop_assert!(v(11) >= 0.0 && v(11) <= v(2).min(v(7)));
            prop_assert_eq!(v(12), index.bm25_score(&query, &d.doc_id).unwrap());
            prop_assert!((0.0..=1.0).contains(&v(13)) && (0.0..=1.0).contains(&v(14)));
            // extraction does not depend on call order
            prop_assert_eq!(ex.extract(&query, d).unwrap(), f);
        }
    }
}
