use proptest::prelude::*;
use rand::{Rng as _, RngCore};

use super::*;
use crate::autodiff::{param_gradient_error, ParamSet, Tape, Tensor};
use crate::nn::Linear;
use crate::rng::derive_rng;
use crate::segmentation::{solid_sequence, FrameSequence, Shot, ShotId};

fn shot(start: usize, end: usize) -> Shot {
    Shot::new(ShotId::new("v", start as u32), start, end).unwrap()
}

fn noise_frames(seed: u64, w: usize, h: usize, count: usize) -> FrameSequence {
    let mut rng = derive_rng(seed, "frames", 0);
    let mut data = vec![0u8; w * h * 3 * count];
    rng.fill_bytes(&mut data);
    FrameSequence::new(w, h, data).unwrap()
}

#[test]
fn eval_frame_sampling_uses_segment_centers() {
    assert_eq!(sample_frames(&shot(0, 30), 3, &mut Mode::Eval), vec![5, 15, 25]);
    assert_eq!(sample_frames(&shot(0, 1), 3, &mut Mode::Eval), vec![0, 0, 0]);
    assert_eq!(sample_frames(&shot(10, 16), 3, &mut Mode::Eval), vec![11, 13, 15]);
    for (s, e, m) in [(3, 50, 3), (7, 9, 5), (0, 100, 8)] {
        let expect: Vec<usize> = (0..m)
            .map(|i| s + ((i as f64 + 0.5) * (e - s) as f64 / m as f64).floor() as usize)
            .collect();
        assert_eq!(sample_frames(&shot(s, e), m, &mut Mode::Eval), expect);
    }
}

#[test]
fn train_frame_sampling_stays_in_segments() {
    let mut rng = derive_rng(1, "t", 0);
    for _ in 0..200 {
        let picks = sample_frames(&shot(10, 40), 3, &mut Mode::Train(&mut rng));
        for (i, &p) in picks.iter().enumerate() {
            assert!((10 + 10 * i..20 + 10 * i).contains(&p));
        }
    }
    let picks = sample_frames(&shot(4, 5), 3, &mut Mode::Train(&mut rng));
    assert_eq!(picks, vec![4, 4, 4]);
}

#[test]
fn shot_sampling_cases() {
    assert_eq!(sample_shots(8, 8, &mut Mode::Eval).unwrap(), (0..8).collect::<Vec<_>>());
    assert_eq!(sample_shots(16, 8, &mut Mode::Eval).unwrap(), vec![0, 2, 4, 6, 8, 10, 12, 14]);
    let mut rng = derive_rng(2, "s", 0);
    let few = sample_shots(3, 8, &mut Mode::Train(&mut rng)).unwrap();
    assert_eq!(few.len(), 8);
    assert!(few.iter().all(|&i| i < 3));
    assert!(few.windows(2).all(|w| w[0] <= w[1]));
    let many = sample_shots(40, 8, &mut Mode::Train(&mut rng)).unwrap();
    assert!(many.windows(2).all(|w| w[0] < w[1]));
    assert!(matches!(sample_shots(0, 8, &mut Mode::Eval), Err(crate::Error::EmptyInput(_))));
}

#[test]
fn extractor_dimension_and_blocks() {
    let ex = HistogramEdgeExtractor::default();
    assert_eq!(ex.dim(), 138);
    let seq = noise_frames(4, 9, 7, 1);
    let f = ex.extract(&seq.frame(0).unwrap());
    assert_eq!(f.len(), 138);
    assert!(f.iter().all(|v| v.is_finite()));
    assert!((f[..128].iter().sum::<f32>() - 1.0).abs() < 1e-5);
    assert!((f[128..136].iter().sum::<f32>() - 1.0).abs() < 1e-5);
    let flat = solid_sequence(4, 4, [90, 90, 90], 1).unwrap();
    let g = ex.extract(&flat.frame(0).unwrap());
    assert_eq!(&g[128..136], &[0.125; 8]);
    assert!((g[136] - 90.0 / 255.0).abs() < 1e-6);
    assert!(g[137].abs() < 1e-6);
}

#[test]
fn vertical_edge_lands_in_horizontal_orientation_bin() {
    let (w, h) = (6, 5);
    let mut px = Vec::new();
    for _ in 0..h {
        for x in 0..w {
            px.extend_from_slice(if x < 3 { &[0, 0, 0] } else { &[255, 255, 255] });
        }
    }
    let seq = FrameSequence::new(w, h, px).unwrap();
    let hist = HistogramEdgeExtractor::default().orientation_histogram(&seq.frame(0).unwrap());
    assert_eq!(hist[0], 1.0);
}

#[test]
fn identical_frames_give_the_frame_feature() {
    let ex = HistogramEdgeExtractor::default();
    let seq = solid_sequence(5, 5, [30, 200, 60], 12).unwrap();
    let frame = ex.extract(&seq.frame(0).unwrap());
    let s = encode_shot(&shot(0, 12), &seq, &ex, 3, &mut Mode::Eval).unwrap();
    assert_eq!(s, frame);
    let shots = vec![shot(0, 6), shot(6, 12)];
    let v = encode_video(&shots, &seq, &ex, 8, 3, &mut Mode::Eval).unwrap();
    assert_eq!(v, frame);
}

#[test]
fn two_frame_and_two_shot_means() {
    let ex = HistogramEdgeExtractor::default();
    let seq = noise_frames(5, 6, 6, 4);
    let u = ex.extract(&seq.frame(0).unwrap());
    let v = ex.extract(&seq.frame(1).unwrap());
    // [0,2) with m=2 samples frames 0 and 1
    let s = encode_shot(&shot(0, 2), &seq, &ex, 2, &mut Mode::Eval).unwrap();
    let expect: Vec<f32> = u.iter().zip(&v).map(|(&a, &b)| ((a as f64 + b as f64) / 2.0) as f32).collect();
    assert_eq!(s, expect);
    let shots = vec![shot(0, 1), shot(1, 2)];
    let video = encode_video(&shots, &seq, &ex, 2, 1, &mut Mode::Eval).unwrap();
    assert_eq!(video, expect);
}

#[test]
fn encodings_match_loop_oracle() {
    let ex = HistogramEdgeExtractor::default();
    for seed in 0..5 {
        let seq = noise_frames(seed, 5, 4, 60);
        let shots = vec![shot(0, 13), shot(13, 14), shot(14, 40), shot(40, 60)];
        for (n, m) in [(8, 3), (3, 2), (4, 5)] {
            let picks = sample_shots(shots.len(), n, &mut Mode::Eval).unwrap();
            let mut video = vec![0.0f64; ex.dim()];
            for &i in &picks {
                let s = &shots[i];
                let mut acc = vec![0.0f64; ex.dim()];
                for j in 0..m {
                    let t = s.start + (2 * j + 1) * s.len() / (2 * m);
                    let f = ex.extract(&seq.frame(t).unwrap());
                    acc.iter_mut().zip(&f).for_each(|(a, &b)| *a += b as f64);
                }
                let acc: Vec<f32> = acc.iter().map(|a| (a / m as f64) as f32).collect();
                assert_eq!(acc, encode_shot(s, &seq, &ex, m, &mut Mode::Eval).unwrap());
                video.iter_mut().zip(&acc).for_each(|(a, &b)| *a += b as f64);
            }
            let video: Vec<f32> = video.iter().map(|a| (a / n as f64) as f32).collect();
            assert_eq!(video, encode_video(&shots, &seq, &ex, n, m, &mut Mode::Eval).unwrap());
        }
    }
}

#[test]
fn out_of_bounds_shot_is_a_range_error() {
    let seq = noise_frames(0, 3, 3, 5);
    let ex = HistogramEdgeExtractor::default();
    let r = encode_shot(&shot(2, 9), &seq, &ex, 3, &mut Mode::Eval);
    assert!(matches!(r, Err(crate::Error::Range(_))));
}

#[test]
fn train_encoding_is_seed_deterministic() {
    let ex = HistogramEdgeExtractor::default();
    let seq = noise_frames(9, 4, 4, 80);
    let shots: Vec<Shot> = (0..8).map(|i| shot(i * 10, i * 10 + 10)).collect();
    let run = |seed| {
        let mut rng = derive_rng(seed, "enc", 0);
        encode_video(&shots, &seq, &ex, 4, 3, &mut Mode::Train(&mut rng)).unwrap()
    };
    assert_eq!(run(1), run(1));
    assert_ne!(run(1), run(2));
}

#[test]
fn frame_source_matches_direct_encoding() {
    let ex = HistogramEdgeExtractor::default();
    let seq = noise_frames(3, 4, 4, 30);
    let shots = vec![shot(0, 10), shot(10, 30)];
    let mut src = FrameSource::new(&ex, 3);
    src.add_video("v", seq.clone(), shots.clone()).unwrap();
    assert_eq!(src.shot_count("v").unwrap(), 2);
    let a = src.video_feature("v", 8, &mut Mode::Eval).unwrap();
    let b = encode_video(&shots, &seq, &ex, 8, 3, &mut Mode::Eval).unwrap();
    assert_eq!(a, b);
    let store = extract_store(&shots, &seq, &ex, 3).unwrap();
    assert_eq!(store.video_feature("v", 8, &mut Mode::Eval).unwrap(), a);
}

#[test]
fn projection_commutes_with_pooling() {
    let mut rng = derive_rng(0, "proj", 0);
    let mut params = ParamSet::<f32>::new();
    let proj = Linear::new(&mut params, "p", 5, 3, true, &mut rng).unwrap();
    let rows: Vec<f32> = (0..4 * 2 * 5).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut tape = Tape::new();
    let bound = params.bind_frozen(&mut tape);
    let x = tape.constant(Tensor::matrix(8, 5, rows.clone()).unwrap());
    let pooled = pool_projected(&mut tape, &bound, &proj, x, 2).unwrap();
    let mut mean = vec![0.0f32; 5];
    for r in rows.chunks(5) {
        mean.iter_mut().zip(r).for_each(|(a, b)| *a += b / 8.0);
    }
    let direct = proj.apply(&params, &mean);
    for (a, b) in tape.value(pooled).data().iter().zip(&direct) {
        assert!((a - b).abs() < 1e-5);
    }
}

#[test]
fn gradient_through_projection_and_both_poolings() {
    for seed in 0..10 {
        let mut rng = derive_rng(seed, "poolgrad", 0);
        let mut params = ParamSet::<f64>::new();
        let proj = Linear::new(&mut params, "p", 4, 3, true, &mut rng).unwrap();
        let rows = crate::autodiff::uniform::<f64, _>(&mut rng, &[6, 4], 1.0);
        let weights = crate::autodiff::uniform::<f64, _>(&mut rng, &[3], 1.0);
        let err = param_gradient_error(
            &params,
            |tape, bound| {
                let x = tape.constant(rows.clone());
                let pooled = pool_projected(tape, bound, &proj, x, 3)?;
                let sq = tape.tanh(pooled);
                let w = tape.constant(weights.clone());
                let y = tape.hadamard(sq, w)?;
                Ok(tape.sum_all(y))
            },
            1e-3,
            1e-6,
        )
        .unwrap();
        assert!(err <= 1e-3, "seed {seed}: {err}");
    }
}

#[test]
fn empty_store_roundtrip_and_header() {
    let store = FeatureStore::new(7);
    let bytes = store.to_bytes().unwrap();
    assert_eq!(bytes.len(), 20);
    assert_eq!(&bytes[..4], b"SHTF");
    assert_eq!(FeatureStore::from_bytes(&bytes).unwrap(), store);
}

#[test]
fn single_record_roundtrip_is_bitwise() {
    let mut store = FeatureStore::new(3);
    store
        .insert(ShotId::new("tt01", 4), &[f32::MIN_POSITIVE, -0.0, f32::NAN])
        .unwrap();
    let back = FeatureStore::from_bytes(&store.to_bytes().unwrap()).unwrap();
    assert_eq!(back, store);
    assert_eq!(back.get(&ShotId::new("tt01", 4)).unwrap()[1].to_bits(), (-0.0f32).to_bits());
}

#[test]
fn store_errors() {
    let mut store = FeatureStore::new(2);
    store.insert(ShotId::new("a", 0), &[1.0, 2.0]).unwrap();
    assert!(matches!(store.insert(ShotId::new("a", 0), &[1.0, 2.0]), Err(crate::Error::DuplicateId(_))));
    assert!(matches!(store.insert(ShotId::new("a", 1), &[1.0]), Err(crate::Error::Shape { .. })));
    assert!(matches!(store.get(&ShotId::new("b", 0)), Err(crate::Error::Lookup(_))));
    let bytes = store.to_bytes().unwrap();
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(FeatureStore::from_bytes(&bad), Err(crate::Error::Format(_))));
    let mut bad = bytes.clone();
    bad[4] = 9;
    assert!(matches!(FeatureStore::from_bytes(&bad), Err(crate::Error::Format(_))));
    // header 20 + id_len 2 + "a" 1 + ordinal 4 = 27, then the values
    assert!(matches!(
        FeatureStore::from_bytes(&bytes[..bytes.len() - 3]),
        Err(crate::Error::Corrupt { offset: 27, .. })
    ));
}

#[test]
fn store_groups_by_video_in_order() {
    let mut store = FeatureStore::new(1);
    for (v, o) in [("b", 0), ("a", 0), ("b", 1), ("a", 1), ("b", 2)] {
        store.insert(ShotId::new(v, o), &[o as f32]).unwrap();
    }
    assert_eq!(store.videos(), &["b".to_string(), "a".to_string()]);
    assert_eq!(store.shot_count("b").unwrap(), 3);
    assert_eq!(store.shot_id("a", 1).unwrap(), ShotId::new("a", 1));
}

fn arb_store() -> impl Strategy<Value = FeatureStore> {
    (0usize..6, proptest::collection::vec(("[a-z0-9/]{1,6}", any::<u32>()), 0..20), any::<u64>()).prop_map(
        |(dim, ids, seed)| {
            let mut rng = derive_rng(seed, "store", 0);
            let mut store = FeatureStore::new(dim);
            for (v, o) in ids {
                let f: Vec<f32> = (0..dim).map(|_| f32::from_bits(rng.next_u32())).collect();
                let _ = store.insert(ShotId::new(v, o), &f);
            }
            store
        },
    )
}

proptest! {
    #[test]
    fn shtf_roundtrip_is_bitwise(store in arb_store()) {
        let bytes = store.to_bytes().unwrap();
        let back = FeatureStore::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &store);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn pooling_is_permutation_invariant_and_linear(seed in any::<u64>(), c in 0.1f32..4.0) {
        let mut rng = derive_rng(seed, "perm", 0);
        let rows: Vec<Vec<f32>> = (0..6).map(|_| (0..4).map(|_| rng.random_range(-1.0f32..1.0)).collect()).collect();
        let mut a = FeatureStore::new(4);
        let mut b = FeatureStore::new(4);
        let mut scaled = FeatureStore::new(4);
        for (i, r) in rows.iter().enumerate() {
            a.insert(ShotId::new("v", i as u32), r).unwrap();
            b.insert(ShotId::new("v", i as u32), &rows[5 - i]).unwrap();
            let s: Vec<f32> = r.iter().map(|x| x * c).collect();
            scaled.insert(ShotId::new("v", i as u32), &s).unwrap();
        }
        let fa = a.video_feature("v", 6, &mut Mode::Eval).unwrap();
        let fb = b.video_feature("v", 6, &mut Mode::Eval).unwrap();
        let fs = scaled.video_feature("v", 6, &mut Mode::Eval).unwrap();
        for i in 0..4 {
            prop_assert!((fa[i] - fb[i]).abs() < 1e-6);
            prop_assert!((fs[i] - c * fa[i]).abs() < 1e-5);
        }
    }
}
