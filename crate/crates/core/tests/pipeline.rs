//! End-to-end clustering of synthetic conversations.

use ovsc_core::affinity::cosine_affinity;
use ovsc_core::pipeline::{diarize, DiarizeConfig};
use ovsc_core::scoring::der_score;
use ovsc_core::segments::{EmbeddingSequence, OverlapVector, SegmentSpan};
use ovsc_core::synth::{generate, SynthConfig};
use ovsc_core::Error;

fn synth(k: usize, n: usize, frac: f64, sigma: f64, seed: u64) -> ovsc_core::synth::SynthOutput {
    generate(&SynthConfig {
        n_speakers: k,
        n_segments: n,
        overlap_fraction: frac,
        noise_sigma: sigma,
        seed,
        ..SynthConfig::default()
    })
    .unwrap()
}

#[test]
fn noiseless_without_overlap_is_perfect() {
    for seed in 0..4 {
        let out = synth(3, 45, 0.0, 0.0, seed);
        let a = cosine_affinity(out.embeddings.vectors()).unwrap();
        // Block-constant: every pair of segments is either identical or not.
        for i in 0..45 {
            for j in 0..45 {
                let same = out.labels[i] == out.labels[j];
                assert_eq!(same, (a[(i, j)] - 1.0).abs() < 1e-12);
            }
        }
        let d = diarize(&out.embeddings, &OverlapVector::zeros(45), &DiarizeConfig::default()).unwrap();
        assert_eq!(d.k, 3);
        assert_eq!(der_score(&out.reference, &d.timeline, 0.0).unwrap().der, 0.0);
    }
}

#[test]
fn single_noiseless_overlap_gets_both_speakers() {
    for seed in 0..6 {
        let mut out = synth(3, 40, 0.0, 0.0, seed);
        // Replace one segment with the mean of speakers 0 and 1.
        let target = out.labels.iter().position(|l| l == &[0]).unwrap();
        let mixed: Vec<f64> = out.centroids[0]
            .iter()
            .zip(&out.centroids[1])
            .map(|(a, b)| (a + b) / 2.0)
            .collect();
        let spans: Vec<SegmentSpan> = out.embeddings.spans().to_vec();
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                if i == target {
                    mixed.clone()
                } else {
                    out.embeddings.row(i)
                }
            })
            .collect();
        out.embeddings = EmbeddingSequence::new(spans, rows).unwrap();
        let mut flags = vec![false; 40];
        flags[target] = true;

        let d = diarize(
            &out.embeddings,
            &OverlapVector::from_flags(flags),
            &DiarizeConfig::default(),
        )
        .unwrap();
        assert_eq!(d.k, 3);
        let cluster_of = |speaker: usize| {
            let i = (0..40).find(|&i| i != target && out.labels[i] == [speaker]).unwrap();
            d.assignment.labels(i).next().unwrap()
        };
        let mut got: Vec<usize> = d.assignment.labels(target).collect();
        let mut want = vec![cluster_of(0), cluster_of(1)];
        got.sort_unstable();
        want.sort_unstable();
        assert_eq!(got, want, "seed {seed}");
    }
}

#[test]
fn noiseless_oracle_overlaps_are_perfect() {
    for seed in 0..3 {
        let out = synth(4, 80, 0.2, 0.0, seed);
        let d = diarize(&out.embeddings, &out.overlap, &DiarizeConfig::default()).unwrap();
        assert_eq!(d.k, 4);
        assert_eq!(der_score(&out.reference, &d.timeline, 0.0).unwrap().der, 0.0);
    }
}

#[test]
fn oracle_flags_reduce_missed_speech() {
    let out = synth(4, 80, 0.3, 0.1, 3);
    let cfg = DiarizeConfig::default();
    let aware = diarize(&out.embeddings, &out.overlap, &cfg).unwrap();
    let plain = diarize(&out.embeddings, &OverlapVector::zeros(80), &cfg).unwrap();
    let a = der_score(&out.reference, &aware.timeline, 0.0).unwrap();
    let p = der_score(&out.reference, &plain.timeline, 0.0).unwrap();
    assert!(a.missed < p.missed && a.der < p.der, "{a:?} vs {p:?}");
}

#[test]
fn clean_neighbor_switch_restores_the_plain_graph() {
    let out = synth(3, 30, 0.2, 0.05, 1);
    let cfg = DiarizeConfig {
        clean_neighbors: false,
        ..DiarizeConfig::default()
    };
    let d = diarize(&out.embeddings, &out.overlap, &cfg).unwrap();
    for i in 0..30 {
        assert_eq!(d.assignment.row_sum(i), 1 + out.overlap.extra(i));
    }
}

#[test]
fn tiny_recordings() {
    let one = EmbeddingSequence::new(vec![SegmentSpan::new("r", 0, 0.0, 1.5).unwrap()], vec![vec![1.0, 0.0]]).unwrap();
    let d = diarize(&one, &OverlapVector::zeros(1), &DiarizeConfig::default()).unwrap();
    assert_eq!((d.k, d.timeline.len()), (1, 1));

    let two = EmbeddingSequence::new(
        vec![
            SegmentSpan::new("r", 0, 0.0, 1.5).unwrap(),
            SegmentSpan::new("r", 1, 0.75, 2.25).unwrap(),
        ],
        vec![vec![1.0, 0.0], vec![0.0, 1.0]],
    )
    .unwrap();
    // The only admissible p keeps the diagonal alone: no gap to read a count from.
    assert!(matches!(
        diarize(&two, &OverlapVector::zeros(2), &DiarizeConfig::default()),
        Err(Error::IndeterminateCount(_))
    ));
    assert!(matches!(
        diarize(&two, &OverlapVector::zeros(3), &DiarizeConfig::default()),
        Err(Error::Contract(_))
    ));
}

#[test]
fn repeated_runs_are_identical() {
    let out = synth(4, 60, 0.2, 0.1, 9);
    let cfg = DiarizeConfig::default();
    let a = diarize(&out.embeddings, &out.overlap, &cfg).unwrap();
    let b = diarize(&out.embeddings, &out.overlap, &cfg).unwrap();
    assert_eq!(a.timeline, b.timeline);
    assert_eq!(a.phi.to_bits(), b.phi.to_bits());
}
