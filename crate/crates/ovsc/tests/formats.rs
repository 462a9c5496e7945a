//! File format round trips.

use std::path::Path;

use ovsc::ingest;
use ovsc_core::synth::{generate, SynthConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn embeddings_round_trip_bit_exact(seed in 0u64..1000, k in 2usize..5, n in 3usize..30, sigma in 0.0f64..0.5) {
        let out = generate(&SynthConfig {
            n_speakers: k,
            n_segments: n,
            noise_sigma: sigma,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let text = ingest::format_embeddings(&out.embeddings);
        let back = ingest::parse_embeddings(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(back, out.embeddings);
    }

    #[test]
    fn rttm_round_trip(seed in 0u64..1000, k in 2usize..5, n in 3usize..30, frac in 0.0f64..0.5) {
        let out = generate(&SynthConfig {
            n_speakers: k,
            n_segments: n,
            overlap_fraction: frac,
            seed,
            ..SynthConfig::default()
        })
        .unwrap();
        let text = ingest::format_rttm("rec", &out.reference);
        let back = ingest::parse_rttm(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(back.len(), 1);
        prop_assert_eq!(&back["rec"], &out.reference);
        prop_assert_eq!(ingest::format_rttm("rec", &back["rec"]), text);
    }

    #[test]
    fn flags_round_trip(flags in proptest::collection::vec(any::<bool>(), 0..50)) {
        let v = ovsc_core::segments::OverlapVector::from_flags(flags);
        let back = ingest::parse_flags(&ingest::format_flags(&v), Path::new("mem")).unwrap();
        prop_assert_eq!(back, v);
    }
}
