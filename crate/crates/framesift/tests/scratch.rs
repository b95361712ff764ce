mod common;

use framesift::bench::{parse_lambda_grid, spearman, sweep_lambda};
use framesift::config::{DomMode, SamplingConfig};
use framesift::synth::{gen_corpus, FrameCountDist, SyntheticSpec};

#[test]
fn explore_sweep_corpus() {
    let grid = parse_lambda_grid("1.5:3.0:0.1").unwrap();
    for scene_count in [5usize] {
        for (min, max) in [(8usize, 20usize), (8, 16), (10, 18), (6, 18)] {
            for tr in [2usize, 3, 4, 6, 8] {
                for noise in [0.02f64, 0.05] {
                    for mode in [DomMode::RawSum, DomMode::Mean] {
                        let spec = SyntheticSpec {
                            scene_count,
                            frames_per_scene: FrameCountDist::UniformRange { min, max },
                            transition_length: tr,
                            noise_std: noise,
                            dim: scene_count,
                            corpus_size: 60,
                            seed: 424242,
                            dominant_scene_fraction: None,
                        };
                        let corpus = gen_corpus(&spec).unwrap();
                        let lengths: Vec<usize> = corpus.iter().map(|v| v.frame_count()).collect();
                        let lo = *lengths.iter().min().unwrap();
                        let hi = *lengths.iter().max().unwrap();
                        if lo < 40 || hi > 120 {
                            continue;
                        }
                        let base = SamplingConfig::default().with_frames(6).with_dom_mode(mode);
                        let report = sweep_lambda(&corpus, &base, &grid).unwrap();
                        let rs: Vec<f64> = report.rows.iter().map(|r| r.r_success).collect();
                        let violations = rs.windows(2).filter(|w| w[1] < w[0]).count();
                        let rho = spearman(&grid, &rs);
                        if rs[0] < 0.9 {
                            println!(
                                "K={scene_count} len={min}..{max} tr={tr} s={noise} {mode:?}: viol={violations} rho={rho:.3} full={:?} rs={:?}",
                                report.min_full_success_lambda,
                                rs.iter().map(|r| (r * 100.0).round() as i64).collect::<Vec<_>>()
                            );
                        }
                    }
                }
            }
        }
    }
}
