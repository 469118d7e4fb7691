use proptest::prelude::*;
use rand::Rng as _;

use super::*;
use crate::autodiff::{param_gradient_error, ParamSet, Tape, Tensor};
use crate::encoder::FeatureStore;
use crate::rng::derive_rng;
use crate::segmentation::ShotId;

fn vocab() -> TagVocabulary {
    TagVocabulary::default()
}

fn small_vocab() -> TagVocabulary {
    TagVocabulary::new(
        (0..5).map(|i| format!("g{i}")).collect(),
        (0..4).map(|i| format!("k{i}")).collect(),
    )
    .unwrap()
}

fn model(input: usize, proj: usize, seed: u64) -> TagModel {
    TagModel::new(input, proj, &vocab(), Scoring::Sigmoid, &mut derive_rng(seed, "m", 0)).unwrap()
}

fn random_rows(seed: u64, n: usize, d: usize) -> Vec<Vec<f32>> {
    let mut rng = derive_rng(seed, "rows", 0);
    (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect()
}

fn store_of(video: &str, rows: &[Vec<f32>]) -> FeatureStore {
    let mut s = FeatureStore::new(rows[0].len());
    for (i, r) in rows.iter().enumerate() {
        s.insert(ShotId::new(video, i as u32), r).unwrap();
    }
    s
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[test]
fn zero_head_scores_one_half() {
    let mut m = model(6, 0, 0);
    for t in m.params.tensors_mut() {
        t.data_mut().fill(0.0);
    }
    let p = m.forward_video("v", &[0.3; 6]).unwrap();
    assert!(p.genres.iter().chain(&p.keywords).all(|&s| s == 0.5));
}

#[test]
fn large_logit_saturates() {
    let mut m = model(2, 0, 0);
    for t in m.params.tensors_mut() {
        t.data_mut().fill(0.0);
    }
    let b = m.layout.genre.bias.unwrap();
    m.params.get_mut(b).data_mut()[4] = 20.0;
    let p = m.forward_video("v", &[1.0, -1.0]).unwrap();
    assert!(p.genres[4] > 0.999_999);
    assert_eq!(p.genres[3], 0.5);
}

#[test]
fn forward_matches_affine_sigmoid_oracle() {
    for seed in 0..5 {
        let m = model(7, 4, seed);
        let x = &random_rows(seed, 1, 7)[0];
        let p = m.forward_video("v", x).unwrap();
        let proj = m.layout.projection.as_ref().unwrap();
        let (pw, pb) = (m.params.get(proj.weight), m.params.get(proj.bias.unwrap()));
        let z: Vec<f64> = (0..4)
            .map(|j| pb.data()[j] as f64 + (0..7).map(|i| x[i] as f64 * pw.data()[i * 4 + j] as f64).sum::<f64>())
            .collect();
        let (gw, gb) = (m.params.get(m.layout.genre.weight), m.params.get(m.layout.genre.bias.unwrap()));
        for l in 0..22 {
            let logit = gb.data()[l] as f64 + (0..4).map(|j| z[j] * gw.data()[j * 22 + l] as f64).sum::<f64>();
            assert!((sigmoid(logit) - p.genres[l] as f64).abs() < 1e-6);
        }
    }
}

#[test]
fn softmax_scoring_normalizes_each_branch() {
    let mut m = model(5, 3, 2);
    m.scoring = Scoring::Softmax;
    let p = m.forward_video("v", &random_rows(1, 1, 5)[0]).unwrap();
    assert!((p.genres.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    assert!((p.keywords.iter().sum::<f32>() - 1.0).abs() < 1e-5);
    assert!("cosine".parse::<Scoring>().is_err());
}

fn loss_value(g: Tensor<f64>, k: Tensor<f64>, truths: &[LabelSet], lambda: f64, scoring: Scoring) -> f64 {
    let mut tape = Tape::<f64>::new();
    let gv = tape.constant(g);
    let kv = tape.constant(k);
    let l = multitask_loss(&mut tape, gv, kv, truths, lambda, scoring).unwrap();
    tape.value(l).item()
}

#[test]
fn perfect_logits_give_near_zero_loss() {
    let truths = vec![
        LabelSet {
            genres: vec![1],
            keywords: vec![0, 2],
        },
        LabelSet {
            genres: vec![0, 3],
            keywords: vec![],
        },
    ];
    let mut g = Tensor::full(&[2, 4], -20.0);
    let mut k = Tensor::full(&[2, 3], -20.0);
    for (r, t) in truths.iter().enumerate() {
        t.genres.iter().for_each(|&i| g.data_mut()[r * 4 + i] = 20.0);
        t.keywords.iter().for_each(|&i| k.data_mut()[r * 3 + i] = 20.0);
    }
    assert!(loss_value(g, k, &truths, 0.5, Scoring::Sigmoid) < 1e-8);
}

#[test]
fn zero_logits_single_positive_genre_term_is_ln2() {
    let truths = vec![LabelSet {
        genres: vec![5],
        keywords: vec![],
    }];
    let l = loss_value(Tensor::zeros(&[1, 22]), Tensor::zeros(&[1, 33]), &truths, 1.0, Scoring::Sigmoid);
    assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
    let half = loss_value(Tensor::zeros(&[1, 22]), Tensor::zeros(&[1, 33]), &truths, 0.5, Scoring::Sigmoid);
    assert!((half - 0.5 * std::f64::consts::LN_2).abs() < 1e-12);
}

#[test]
fn mixed_loss_matches_scalar_recomputation() {
    let mut rng = derive_rng(7, "mixed", 0);
    let (rows, ng, nk) = (4, 5, 3);
    let g: Vec<f64> = (0..rows * ng).map(|_| rng.random_range(-3.0..3.0)).collect();
    let k: Vec<f64> = (0..rows * nk).map(|_| rng.random_range(-3.0..3.0)).collect();
    let truths = vec![
        LabelSet { genres: vec![0], keywords: vec![1] },
        LabelSet { genres: vec![2, 4], keywords: vec![] },
        LabelSet { genres: vec![1], keywords: vec![0, 2] },
        LabelSet { genres: vec![3], keywords: vec![] },
    ];
    let lambda = 0.3;
    let bce = |z: f64, y: f64| -(y * sigmoid(z).ln() + (1.0 - y) * (1.0 - sigmoid(z)).ln());
    let mut per_video = 0.0;
    for (r, t) in truths.iter().enumerate() {
        let gt: f64 = (0..ng)
            .map(|i| bce(g[r * ng + i], t.genres.contains(&i) as u8 as f64))
            .sum::<f64>()
            / ng as f64;
        per_video += lambda * gt;
        if !t.keywords.is_empty() {
            let kt: f64 = (0..nk)
                .map(|i| bce(k[r * nk + i], t.keywords.contains(&i) as u8 as f64))
                .sum::<f64>()
                / nk as f64;
            per_video += (1.0 - lambda) * kt;
        }
    }
    let expect = per_video / rows as f64;
    let got = loss_value(
        Tensor::matrix(rows, ng, g.clone()).unwrap(),
        Tensor::matrix(rows, nk, k.clone()).unwrap(),
        &truths,
        lambda,
        Scoring::Sigmoid,
    );
    assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");

    // softmax mode: mean cross-entropy over (video, positive label) pairs per branch
    let ce = |z: &[f64], i: usize| {
        let m = z.iter().cloned().fold(f64::MIN, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        lse - z[i]
    };
    let gpairs: Vec<f64> = truths
        .iter()
        .enumerate()
        .flat_map(|(r, t)| t.genres.iter().map(move |&i| (r, i)))
        .map(|(r, i)| ce(&g[r * ng..(r + 1) * ng], i))
        .collect();
    let kpairs: Vec<f64> = truths
        .iter()
        .enumerate()
        .flat_map(|(r, t)| t.keywords.iter().map(move |&i| (r, i)))
        .map(|(r, i)| ce(&k[r * nk..(r + 1) * nk], i))
        .collect();
    let expect = lambda * gpairs.iter().sum::<f64>() / gpairs.len() as f64
        + (1.0 - lambda) * 0.5 * kpairs.iter().sum::<f64>() / kpairs.len() as f64;
    let got = loss_value(
        Tensor::matrix(rows, ng, g).unwrap(),
        Tensor::matrix(rows, nk, k).unwrap(),
        &truths,
        lambda,
        Scoring::Softmax,
    );
    assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
}

#[test]
fn invalid_label_index_is_an_index_error() {
    let truths = vec![LabelSet { genres: vec![22], keywords: vec![] }];
    let mut tape = Tape::<f64>::new();
    let g = tape.constant(Tensor::zeros(&[1, 22]));
    let k = tape.constant(Tensor::zeros(&[1, 33]));
    assert!(matches!(
        multitask_loss(&mut tape, g, k, &truths, 0.5, Scoring::Sigmoid),
        Err(crate::Error::Index(_))
    ));
}

#[test]
fn multitask_gradient_through_head_and_projection() {
    let v = small_vocab();
    for scoring in [Scoring::Sigmoid, Scoring::Softmax] {
        for seed in 0..10 {
            let mut rng = derive_rng(seed, "tag_grad", 0);
            let mut params = ParamSet::<f64>::new();
            let layout = TagLayout::new(&mut params, 4, 3, &v, &mut rng).unwrap();
            let x = crate::autodiff::uniform::<f64, _>(&mut rng, &[3, 4], 1.0);
            let truths = vec![
                LabelSet { genres: vec![1], keywords: vec![0, 3] },
                LabelSet { genres: vec![0, 4], keywords: vec![] },
                LabelSet { genres: vec![2], keywords: vec![1] },
            ];
            let err = param_gradient_error(
                &params,
                |tape, bound| {
                    let xv = tape.constant(x.clone());
                    let (g, k) = layout.logits(tape, bound, xv)?;
                    multitask_loss(tape, g, k, &truths, 0.4, scoring)
                },
                1e-3,
                1e-6,
            )
            .unwrap();
            assert!(err <= 1e-3, "{scoring:?} seed {seed}: {err}");
        }
    }
}

#[test]
fn sequence_head_gradient() {
    let v = small_vocab();
    for seed in 0..10 {
        let mut rng = derive_rng(seed, "seq_grad", 0);
        let mut params = ParamSet::<f64>::new();
        let mut layout = TagLayout::new(&mut params, 3, 2, &v, &mut rng).unwrap();
        layout.add_sequence(&mut params, 3, &mut rng).unwrap();
        let xs: Vec<Tensor<f64>> = (0..3)
            .map(|_| crate::autodiff::uniform::<f64, _>(&mut rng, &[2, 3], 1.0))
            .collect();
        let truths = vec![
            LabelSet { genres: vec![1], keywords: vec![2] },
            LabelSet { genres: vec![3], keywords: vec![] },
        ];
        let err = param_gradient_error(
            &params,
            |tape, bound| {
                let inputs: Vec<_> = xs.iter().map(|x| tape.constant(x.clone())).collect();
                let steps = layout.sequence_logits(tape, bound, &inputs)?;
                let mut acc = None;
                for (g, k) in steps {
                    let l = multitask_loss(tape, g, k, &truths, 0.5, Scoring::Sigmoid)?;
                    acc = Some(match acc {
                        Some(a) => tape.add(a, l)?,
                        None => l,
                    });
                }
                Ok(acc.unwrap())
            },
            1e-3,
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-3, "seed {seed}: {err}");
    }
}

fn one_video_corpus() -> (FeatureStore, Vec<LabeledVideo>) {
    let store = store_of("t0", &random_rows(3, 1, 6));
    let videos = vec![LabeledVideo {
        id: "t0".into(),
        labels: LabelSet { genres: vec![2, 7], keywords: vec![4] },
    }];
    (store, videos)
}

#[test]
fn single_video_loss_decreases_every_step() {
    let (store, videos) = one_video_corpus();
    let cfg = TagTrainConfig {
        epochs: 15,
        learning_rate: 0.05,
        momentum: 0.0,
        lstm_hidden: 0,
        ..Default::default()
    };
    let (_, report) = train_tags(&store, &videos, &vocab(), &cfg).unwrap();
    assert_eq!(report.epoch_losses.len(), 15);
    for w in report.epoch_losses.windows(2) {
        assert!(w[1] < w[0], "{:?}", report.epoch_losses);
    }
}

#[test]
fn training_is_seed_deterministic() {
    let rows = random_rows(4, 30, 5);
    let mut store = FeatureStore::new(5);
    let mut videos = Vec::new();
    for v in 0..6 {
        let id = format!("t{v}");
        for s in 0..5 {
            store.insert(ShotId::new(id.clone(), s), &rows[v * 5 + s as usize]).unwrap();
        }
        videos.push(LabeledVideo {
            id,
            labels: LabelSet { genres: vec![v % 3], keywords: if v % 2 == 0 { vec![v] } else { vec![] } },
        });
    }
    let cfg = TagTrainConfig {
        epochs: 3,
        batch_size: 4,
        lstm_hidden: 4,
        lstm_epochs: 2,
        shots_per_video: 3,
        ..Default::default()
    };
    let run = || {
        let (m, r) = train_tags(&store, &videos, &vocab(), &cfg).unwrap();
        (crate::autodiff::encode_checkpoint(&m.params).unwrap(), r)
    };
    let (a, ra) = run();
    let (b, rb) = run();
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    assert_eq!(ra.sequence_epoch_losses.len(), 2);
    let back = TagModel::from_params(crate::autodiff::decode_checkpoint(&a).unwrap(), Scoring::Sigmoid).unwrap();
    assert!(back.layout.sequence.is_some());
}

#[test]
fn training_rejects_bad_corpora() {
    let (store, mut videos) = one_video_corpus();
    assert!(matches!(
        train_tags(&store, &[], &vocab(), &TagTrainConfig::default()),
        Err(crate::Error::EmptyInput(_))
    ));
    videos[0].labels.genres.clear();
    assert!(matches!(
        train_tags(&store, &videos, &vocab(), &TagTrainConfig::default()),
        Err(crate::Error::Config(_))
    ));
}

#[test]
fn score_average_cases() {
    let m = model(4, 3, 1);
    let rows = random_rows(5, 5, 4);
    let single = store_of("v", &rows[..1]);
    assert_eq!(
        m.infer_score_average(&single, "v").unwrap().genres,
        m.forward_video("v", &rows[0]).unwrap().genres
    );
    let five = store_of("v", &rows);
    let got = m.infer_score_average(&five, "v").unwrap();
    let per: Vec<TagPrediction> = rows.iter().map(|r| m.forward_video("v", r).unwrap()).collect();
    for l in 0..22 {
        let mean = per.iter().map(|p| p.genres[l] as f64).sum::<f64>() / 5.0;
        assert_eq!(got.genres[l], mean as f32);
    }
    let two = store_of("v", &rows[..2]);
    let got2 = m.infer_score_average(&two, "v").unwrap();
    for l in 0..33 {
        let mean = (per[0].keywords[l] as f64 + per[1].keywords[l] as f64) / 2.0;
        assert_eq!(got2.keywords[l], mean as f32);
    }
    let mut reversed = rows.clone();
    reversed.reverse();
    let rev = m.infer_score_average(&store_of("v", &reversed), "v").unwrap();
    for (a, b) in rev.genres.iter().zip(&got.genres) {
        assert!((a - b).abs() < 1e-6);
    }
}

fn with_sequence(seed: u64, hidden: usize) -> TagModel {
    let mut m = model(4, 3, seed);
    m.layout
        .add_sequence(&mut m.params, hidden, &mut derive_rng(seed, "seq", 0))
        .unwrap();
    m
}

/// Hand-rolled LSTM + heads in f64, one step at a time.
fn lstm_oracle(m: &TagModel, steps: &[Vec<f32>]) -> Vec<Vec<f64>> {
    let seq = m.layout.sequence.as_ref().unwrap();
    let lin = |l: &crate::nn::Linear, x: &[f64]| -> Vec<f64> {
        let w = m.params.get(l.weight);
        let b = m.params.get(l.bias.unwrap());
        (0..l.output)
            .map(|j| b.data()[j] as f64 + (0..l.input).map(|i| x[i] * w.data()[i * l.output + j] as f64).sum::<f64>())
            .collect()
    };
    let hdim = seq.lstm.hidden;
    let (mut h, mut c) = (vec![0.0; hdim], vec![0.0; hdim]);
    let mut out = Vec::new();
    for x in steps {
        let x64: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        let z = lin(m.layout.projection.as_ref().unwrap(), &x64);
        let xh: Vec<f64> = z.iter().chain(&h).copied().collect();
        let i: Vec<f64> = lin(&seq.lstm.input_gate, &xh).into_iter().map(sigmoid).collect();
        let f: Vec<f64> = lin(&seq.lstm.forget_gate, &xh).into_iter().map(sigmoid).collect();
        let o: Vec<f64> = lin(&seq.lstm.output_gate, &xh).into_iter().map(sigmoid).collect();
        let g: Vec<f64> = lin(&seq.lstm.cell_gate, &xh).into_iter().map(f64::tanh).collect();
        for j in 0..hdim {
            c[j] = f[j] * c[j] + i[j] * g[j];
            h[j] = o[j] * c[j].tanh();
        }
        out.push(lin(&seq.genre, &h).into_iter().map(sigmoid).collect());
    }
    out
}

#[test]
fn feature_lstm_matches_step_oracle() {
    let m = with_sequence(3, 5);
    let rows = random_rows(8, 4, 4);
    let got = m.infer_feature_lstm(&store_of("v", &rows), "v").unwrap();
    let oracle = lstm_oracle(&m, &rows);
    for l in 0..22 {
        let mean = oracle.iter().map(|s| s[l]).sum::<f64>() / 4.0;
        assert!((got.genres[l] as f64 - mean).abs() < 1e-6);
    }
    let one = m.infer_feature_lstm(&store_of("v", &rows[..1]), "v").unwrap();
    for l in 0..22 {
        assert!((one.genres[l] as f64 - oracle[0][l]).abs() < 1e-6);
    }
    let mut reversed = rows.clone();
    reversed.reverse();
    let rev = m.infer_feature_lstm(&store_of("v", &reversed), "v").unwrap();
    assert!(rev.genres.iter().zip(&got.genres).any(|(a, b)| (a - b).abs() > 1e-6));
}

#[test]
fn feature_lstm_constant_input_without_recurrence() {
    let mut m = with_sequence(4, 3);
    let seq = m.layout.sequence.clone().unwrap();
    let proj = m.layout.feature_dim();
    for gate in [&seq.lstm.input_gate, &seq.lstm.forget_gate, &seq.lstm.output_gate, &seq.lstm.cell_gate] {
        let w = m.params.get_mut(gate.weight);
        // rows past the input width multiply the previous hidden state
        w.data_mut()[proj * gate.output..].fill(0.0);
    }
    // a closed forget gate keeps the cell from accumulating
    m.params.get_mut(seq.lstm.forget_gate.bias.unwrap()).data_mut().fill(-30.0);
    m.params.get_mut(seq.lstm.forget_gate.weight).data_mut().fill(0.0);
    let row = random_rows(2, 1, 4).remove(0);
    let steps = m.sequence_scores(&vec![row.clone(); 4]).unwrap();
    for s in &steps[1..] {
        for (a, b) in s.0.iter().zip(&steps[0].0) {
            assert!((a - b).abs() < 1e-6);
        }
    }
    let mean = m.infer_feature_lstm(&store_of("v", &vec![row; 4]), "v").unwrap();
    for (a, b) in mean.genres.iter().zip(&steps[2].0) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn feature_lstm_requires_sequence_head() {
    let m = model(4, 3, 0);
    let s = store_of("v", &random_rows(1, 2, 4));
    assert!(matches!(m.infer_feature_lstm(&s, "v"), Err(crate::Error::Config(_))));
}

#[test]
fn recall_cases() {
    let s = vec![vec![0.9, 0.1, 0.8, 0.7, 0.2]];
    assert_eq!(recall_at_k(&s, &[vec![3]], 3).unwrap(), 1.0);
    // top-3 = {0, 2, 3}; truth {0, 2, 1, 4} → 2 of min(3,4)
    assert!((recall_at_k(&s, &[vec![0, 2, 1, 4]], 3).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    // ties rank the lower label first
    let tied = vec![vec![0.5; 5]];
    assert_eq!(recall_at_k(&tied, &[vec![2]], 3).unwrap(), 1.0);
    assert_eq!(recall_at_k(&tied, &[vec![3]], 3).unwrap(), 0.0);
    // empty truths are skipped
    assert_eq!(recall_at_k(&[s[0].clone(), s[0].clone()], &[vec![], vec![1]], 3).unwrap(), 0.0);
    assert!(recall_at_k(&s, &[vec![5]], 3).is_err());
}

/// Recall by enumerating which labels beat each label.
fn brute_recall(scores: &[Vec<f32>], truths: &[Vec<usize>], k: usize) -> f64 {
    let mut total = 0.0;
    let mut n = 0;
    for (s, t) in scores.iter().zip(truths) {
        if t.is_empty() {
            continue;
        }
        let in_top = |l: usize| {
            let above = (0..s.len()).filter(|&j| s[j] > s[l] || (s[j] == s[l] && j < l)).count();
            above < k
        };
        total += t.iter().filter(|&&l| in_top(l)).count() as f64 / k.min(t.len()) as f64;
        n += 1;
    }
    if n == 0 { 0.0 } else { total / n as f64 }
}

/// AP by counting, for each positive, the positives ranked at or above it.
fn brute_map(scores: &[Vec<f32>], truths: &[Vec<usize>]) -> f64 {
    let labels = scores[0].len();
    let mut aps = Vec::new();
    for l in 0..labels {
        let pos: Vec<usize> = (0..scores.len()).filter(|&v| truths[v].contains(&l)).collect();
        if pos.is_empty() {
            continue;
        }
        let rank = |v: usize| {
            1 + (0..scores.len())
                .filter(|&u| scores[u][l] > scores[v][l] || (scores[u][l] == scores[v][l] && u < v))
                .count()
        };
        let ap: f64 = pos
            .iter()
            .map(|&v| pos.iter().filter(|&&u| rank(u) <= rank(v)).count() as f64 / rank(v) as f64)
            .sum::<f64>()
            / pos.len() as f64;
        aps.push(ap);
    }
    aps.iter().sum::<f64>() / aps.len() as f64
}

#[test]
fn hand_case_three_videos() {
    let scores = vec![vec![0.9, 0.2, 0.4, 0.1], vec![0.3, 0.3, 0.8, 0.6], vec![0.1, 0.7, 0.2, 0.65]];
    let truths = vec![vec![0, 3], vec![1], vec![1, 3, 2]];
    assert_eq!(recall_at_k(&scores, &truths, 3).unwrap(), brute_recall(&scores, &truths, 3));
    assert!((mean_average_precision(&scores, &truths).unwrap() - brute_map(&scores, &truths)).abs() < 1e-12);
}

#[test]
fn map_cases() {
    let truths = vec![vec![0], vec![1], vec![0, 1]];
    let perfect = vec![vec![0.9, 0.1], vec![0.1, 0.9], vec![0.8, 0.8]];
    assert_eq!(mean_average_precision(&perfect, &truths).unwrap(), 1.0);
    let second = vec![vec![0.9], vec![0.2]];
    assert_eq!(mean_average_precision(&second, &[vec![], vec![0]]).unwrap(), 0.5);
    assert_eq!(average_precision(&[false, true]), Some(0.5));
    assert_eq!(average_precision(&[false, false]), None);
    assert_eq!(mean_average_precision_by_video(&perfect, &truths).unwrap(), 1.0);
}

#[test]
fn random_five_by_four_matches_exhaustive_ap() {
    let mut rng = derive_rng(0, "map", 0);
    for _ in 0..50 {
        let scores: Vec<Vec<f32>> = (0..5)
            .map(|_| (0..4).map(|_| (rng.random_range(0..6) as f32) / 5.0).collect())
            .collect();
        let truths: Vec<Vec<usize>> = (0..5)
            .map(|_| (0..4).filter(|_| rng.random_bool(0.4)).collect())
            .collect();
        if truths.iter().all(Vec::is_empty) {
            continue;
        }
        let got = mean_average_precision(&scores, &truths).unwrap();
        assert!((got - brute_map(&scores, &truths)).abs() < 1e-9);
    }
}

#[test]
fn chance_recall_formula() {
    // |T| = 1 of 22 labels with k = 3 → 3/22
    assert!((chance_recall_at_k(&[vec![0]], 22, 3) - 3.0 / 22.0).abs() < 1e-12);
    // |T| = 4 → 3·4/22/3
    assert!((chance_recall_at_k(&[vec![0, 1, 2, 3], vec![]], 22, 3) - 4.0 / 22.0).abs() < 1e-12);
}

#[test]
fn tag_response_series() {
    let mut m = model(4, 3, 0);
    let rows = random_rows(6, 7, 4);
    let store = store_of("movie", &rows);
    let series = shot_tag_response(&m, &vocab(), &store, "movie", "Comedy").unwrap();
    assert_eq!(series.len(), 7);
    assert_eq!(series[3].0, ShotId::new("movie", 3));
    let top = top_shots(&series, 2);
    assert!(top[0].1 >= top[1].1);
    assert!(matches!(
        shot_tag_response(&m, &vocab(), &store, "movie", "Opera"),
        Err(crate::Error::Vocabulary { .. })
    ));
    for t in m.params.tensors_mut() {
        t.data_mut().fill(0.0);
    }
    let flat = shot_tag_response(&m, &vocab(), &store, "movie", "love").unwrap();
    assert!(flat.iter().all(|(_, s)| *s == 0.5));
}

#[test]
fn predictions_file_roundtrip() {
    let m = model(4, 3, 9);
    let rows = random_rows(9, 2, 4);
    let preds: Vec<TagPrediction> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| m.forward_video(&format!("v{i}"), r).unwrap())
        .collect();
    let text = format_predictions(&preds, &vocab()).unwrap();
    assert_eq!(text.lines().count(), 2 * 55);
    assert!(text.starts_with("v0\tgenre\tAction\t0."));
    let back = parse_predictions(&text, &vocab()).unwrap();
    assert_eq!(back.len(), 2);
    for (a, b) in back.iter().zip(&preds) {
        for (x, y) in a.genres.iter().zip(&b.genres) {
            assert!((x - y).abs() <= 5e-7);
        }
    }
}

proptest! {
    #[test]
    fn metrics_match_brute_force(seed in any::<u64>()) {
        let mut rng = derive_rng(seed, "metric_prop", 0);
        let scores: Vec<Vec<f32>> = (0..8)
            .map(|_| (0..6).map(|_| rng.random_range(0..10) as f32 / 9.0).collect())
            .collect();
        let truths: Vec<Vec<usize>> = (0..8).map(|_| (0..6).filter(|_| rng.random_bool(0.3)).collect()).collect();
        prop_assume!(truths.iter().any(|t| !t.is_empty()));
        let r = recall_at_k(&scores, &truths, 3).unwrap();
        prop_assert!((r - brute_recall(&scores, &truths, 3)).abs() < 1e-9);
        let m = mean_average_precision(&scores, &truths).unwrap();
        prop_assert!((m - brute_map(&scores, &truths)).abs() < 1e-9);
    }

    #[test]
    fn metrics_are_rank_based(seed in any::<u64>()) {
        let mut rng = derive_rng(seed, "monotone", 0);
        let scores: Vec<Vec<f32>> = (0..8)
            .map(|_| (0..6).map(|_| rng.random_range(-2.0f32..2.0)).collect())
            .collect();
        let truths: Vec<Vec<usize>> = (0..8).map(|_| (0..6).filter(|_| rng.random_bool(0.3)).collect()).collect();
        let squashed: Vec<Vec<f32>> = scores
            .iter()
            .map(|r| r.iter().map(|&x| 1.0 / (1.0 + (-x).exp())).collect())
            .collect();
        prop_assert_eq!(recall_at_k(&scores, &truths, 3).unwrap(), recall_at_k(&squashed, &truths, 3).unwrap());
        prop_assert_eq!(
            mean_average_precision(&scores, &truths).unwrap(),
            mean_average_precision(&squashed, &truths).unwrap()
        );
    }
}
