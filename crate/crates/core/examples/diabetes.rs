//! Fit the three mixture variants to the diabetes data and print the
//! identified summaries.
//!
//! `cargo run --release -p bfmix-core --example diabetes [seed]`

use bfmix_core::datasets::diabetes;
use bfmix_core::model::{build_default_prior, BnbPrior, ChainConfig, GammaSpec, KPrior};
use bfmix_core::postprocess::{
    ari, confusion_and_mcr, filter_to_kplus, identified_assignments, kplus_distribution,
    kplus_mode, map_partition, posterior_summary, ppr_identify, vi_partition, Partition,
    PprFunctional,
};
use bfmix_core::sampler::{run_seeded, SamplerMode};
use bfmix_core::ChainRng;
use rand::SeedableRng;

fn main() {
    let seed: u64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    let data = diabetes();
    let (truth, _) = Partition::from_names(data.true_labels().unwrap());
    let config = ChainConfig {
        seed,
        store_assignments: true,
        ..ChainConfig::default()
    };
    let runs = [
        (
            "fixed K = 3",
            SamplerMode::FixedK,
            KPrior::Fixed { k: 3 },
            GammaSpec::Fixed { gamma: 1.0 },
        ),
        (
            "SFM K = 10",
            SamplerMode::Sparse,
            KPrior::Sparse { k: 10 },
            GammaSpec::Fixed { gamma: 0.01 },
        ),
        (
            "dynamic MFM",
            SamplerMode::Telescoping { initial_k: 10 },
            KPrior::Random {
                bnb: BnbPrior {
                    a_l: 1.0,
                    a_pi: 4.0,
                    b_pi: 3.0,
                },
                k_max: 100,
            },
            GammaSpec::Dynamic { alpha: 0.5 },
        ),
    ];
    for (name, mode, k_prior, gamma) in runs {
        let prior = build_default_prior(&data, 2.5, 0.75, gamma, k_prior).unwrap();
        let out = run_seeded(&data, &prior, &config, mode).unwrap();
        let dist = kplus_distribution(&out.records);
        let kp = kplus_mode(&dist).unwrap();
        let max_k = out.records.iter().map(|r| r.k).max().unwrap();
        println!("== {name} ({:.1?})", out.wall_time);
        println!("K+ distribution {dist:.3?}, max K {max_k}");
        let filtered = filter_to_kplus(&out.records, kp).unwrap();
        let id = ppr_identify(
            &filtered,
            PprFunctional::Means,
            &mut ChainRng::seed_from_u64(seed),
        )
        .unwrap();
        println!("non-permutation rate {:.4}", id.non_permutation_rate);
        let s = posterior_summary(&id).unwrap();
        let draws = identified_assignments(&id).unwrap();
        let map = map_partition(&draws).unwrap();
        println!("N_k {:?}", map.group_sizes());
        println!("eta {:.3?}", s.eta);
        for k in 0..kp {
            println!("mu_{} {:.2?}", k + 1, s.mu[k].as_slice());
        }
        let c = confusion_and_mcr(&map, &truth).unwrap();
        println!(
            "MAP: ARI {:.3}, MCR {:.3}, table {:?}",
            ari(&map, &truth).unwrap(),
            c.mcr,
            c.table
        );
        let all: Vec<&[usize]> = out
            .records
            .iter()
            .map(|r| r.s.as_deref().unwrap())
            .collect();
        let (vi, score) = vi_partition(&all).unwrap();
        let cv = confusion_and_mcr(&vi, &truth).unwrap();
        println!(
            "VI: ARI {:.3}, MCR {:.3}, mean VI {score:.3}, sizes {:?}",
            ari(&vi, &truth).unwrap(),
            cv.mcr,
            vi.group_sizes()
        );
    }
}
