// temporary numeric probe, deleted before finalizing
use std::time::Instant;
use symdrift::align::{AlignStrategy, AlignVariant, InitOrder};
use symdrift::dataset::{generate_toy_dataset, ToyDatasetSpec};
use symdrift::drift::{DriftConfig, DriftSpace, Normalization};
use symdrift::generator::{sample_one_shot, train, GeneratorParams, SampleSelect, TrainConfig};
use symdrift::metrics::{coverage_amr, EvalConfig};
use symdrift::rng::RandomSource;

fn run_one(space: DriftSpace, variant: AlignVariant, alphabet: u32, steps: usize, lr: f64, seed: u64) {
    run_full(space, variant, alphabet, steps, lr, seed, &[0.02, 0.05, 0.2], 0.05, Normalization::OneSided);
}

fn run_full(space: DriftSpace, variant: AlignVariant, alphabet: u32, steps: usize, lr: f64, seed: u64, temps: &[f64], sigma_conf: f64, norm: Normalization) {
    run_nc(space, variant, alphabet, steps, lr, seed, temps, sigma_conf, norm, 2);
}

#[allow(clippy::too_many_arguments)]
fn run_nc(space: DriftSpace, variant: AlignVariant, alphabet: u32, steps: usize, lr: f64, seed: u64, temps: &[f64], sigma_conf: f64, norm: Normalization, n_classes_per_step: usize) {
    let spec = ToyDatasetSpec {
        n_classes: 8,
        atoms_min: 4,
        atoms_max: 6,
        type_alphabet: alphabet,
        conformers_min: 10,
        conformers_max: 10,
        template_sigma: 1.0,
        conformer_sigma: sigma_conf,
        orbit_scramble: true,
    };
    let mut drng = RandomSource::new(seed);
    let ds = generate_toy_dataset(&spec, &mut drng).unwrap();
    let config = TrainConfig {
        n_classes_per_step,
        n_pos: 30,
        n_neg: 64,
        learning_rate: lr,
        learning_rate_final: None,
        steps,
        seed,
        drift: DriftConfig {
            temperatures: temps.to_vec(),
            normalization: norm,
            space,
            align_strategy: AlignStrategy {
                variant,
                max_iterations: 50,
                init_order: InitOrder::RotationFirst,
            },
            norm_epsilon: 1e-8,
        },
        hidden_widths: vec![128, 128, 128],
        class_embed_dim: 8,
    };
    let t0 = Instant::now();
    let mut rng = RandomSource::new(seed + 1);
    let mut params = GeneratorParams::new(&ds, &config, &mut rng).unwrap();
    let losses = train(&mut params, &ds, &config, &mut rng).unwrap();
    let train_time = t0.elapsed().as_secs_f64();

    let eval = EvalConfig {
        delta: 3.0 * spec.conformer_sigma,
        samples_per_class_multiplier: 2,
    };
    let mut srng = RandomSource::new(seed + 2);
    let mut amr_r = 0.0;
    let mut cov_r = 0.0;
    let mut amr_p = 0.0;
    for class in &ds.classes {
        let refs: Vec<_> = (0..class.conformers.len())
            .map(|k| class.conformation(k).unwrap())
            .collect();
        let gen = sample_one_shot(&params, &class.class_id, 2 * refs.len(), &mut srng, SampleSelect::None)
            .unwrap();
        let m = coverage_amr(&gen, &refs, &eval).unwrap();
        amr_r += m.amr_r / ds.classes.len() as f64;
        cov_r += m.cov_r / ds.classes.len() as f64;
        amr_p += m.amr_p / ds.classes.len() as f64;
    }
    println!(
        "space={space:?}/{variant:?} alphabet={alphabet} steps={steps} lr={lr} temps={temps:?} sc={sigma_conf} norm={norm:?} seed={seed}: amr_r={amr_r:.4} cov_r={cov_r:.3} amr_p={amr_p:.4} loss0={:.3e} lossN={:.3e} train_s={train_time:.1}",
        losses.first().unwrap(),
        losses.last().unwrap(),
    );
}

#[test]
#[ignore]
fn probe_toy_training_embedded() {
    run_one(DriftSpace::Embedded, AlignVariant::Iterative, 3, 2000, 1e-2, 100);
}

#[test]
#[ignore]
fn probe_toy_training_embedded_alpha8() {
    run_one(DriftSpace::Embedded, AlignVariant::Iterative, 8, 2000, 1e-2, 100);
}

#[test]
#[ignore]
fn probe_toy_training_short() {
    run_one(DriftSpace::Embedded, AlignVariant::Iterative, 3, 500, 1e-2, 100);
}

#[test]
#[ignore]
fn probe_lr_sweep() {
    for lr in [0.05, 0.2, 0.5, 1.5] {
        run_one(DriftSpace::Embedded, AlignVariant::Iterative, 3, 500, lr, 100);
    }
}

#[test]
#[ignore]
fn probe_matrix() {
    for temps in [&[0.02f64, 0.05, 0.2][..], &[0.1, 0.25, 1.0][..]] {
        for lr in [0.08, 0.15] {
            run_full(DriftSpace::Embedded, AlignVariant::Iterative, 3, 2000, lr, 100, temps, 0.1, Normalization::OneSided);
        }
    }
}

#[test]
#[ignore]
fn probe_single_class() {
    use symdrift::generator::train_step;
    let spec = ToyDatasetSpec {
        n_classes: 1,
        atoms_min: 4,
        atoms_max: 4,
        type_alphabet: 3,
        conformers_min: 10,
        conformers_max: 10,
        template_sigma: 1.0,
        conformer_sigma: 0.1,
        orbit_scramble: true,
    };
    let mut drng = RandomSource::new(100);
    let ds = generate_toy_dataset(&spec, &mut drng).unwrap();
    for lr in [0.02, 0.08] {
        let config = TrainConfig {
            n_classes_per_step: 1,
            n_pos: 30,
            n_neg: 64,
            learning_rate: lr,
            learning_rate_final: None,
            steps: 2000,
            seed: 100,
            drift: DriftConfig {
                temperatures: vec![0.02, 0.05, 0.2],
                normalization: Normalization::OneSided,
                space: DriftSpace::Embedded,
                align_strategy: AlignStrategy {
                    variant: AlignVariant::Iterative,
                    max_iterations: 50,
                    init_order: InitOrder::RotationFirst,
                },
                norm_epsilon: 1e-8,
            },
            hidden_widths: vec![128, 128, 128],
            class_embed_dim: 8,
        };
        let mut rng = RandomSource::new(101);
        let mut params = GeneratorParams::new(&ds, &config, &mut rng).unwrap();
        let eval = EvalConfig { delta: 0.3, samples_per_class_multiplier: 2 };
        print!("lr={lr}: ");
        for block in 0..10 {
            let mut loss_acc = 0.0;
            for _ in 0..200 {
                loss_acc += train_step(&mut params, &ds, &config, &mut rng).unwrap();
            }
            let mut srng = RandomSource::new(777 + block);
            let class = &ds.classes[0];
            let refs: Vec<_> = (0..10).map(|k| class.conformation(k).unwrap()).collect();
            let gen = sample_one_shot(&params, &class.class_id, 20, &mut srng, SampleSelect::None).unwrap();
            let m = coverage_amr(&gen, &refs, &eval).unwrap();
            print!("[L={:.2} ar={:.2} cr={:.2}] ", loss_acc / 200.0, m.amr_r, m.cov_r);
        }
        println!();
    }
}

#[test]
#[ignore]
fn probe_alphabet_lr_matrix() {
    for alphabet in [8u32, 12] {
        for lr in [0.01, 0.03] {
            run_nc(DriftSpace::Embedded, AlignVariant::Iterative, alphabet, 2000, lr, 100, &[0.02, 0.05, 0.2], 0.1, Normalization::OneSided, 8);
        }
    }
}

#[test]
#[ignore]
fn probe_nc8_highlr() {
    for (lr, sc, alpha) in [(0.16, 0.1, 12u32), (0.25, 0.1, 12), (0.16, 0.15, 12), (0.16, 0.1, 8)] {
        run_nc(DriftSpace::Embedded, AlignVariant::Iterative, alpha, 2000, lr, 100, &[0.02, 0.05, 0.2], sc, Normalization::OneSided, 8);
    }
}

use symdrift::dataset::{Dataset, DatasetClass, DatasetMetadata};
use symdrift::geometry::{apply_group, center, sample_group_element, Conformation};

/// Orbit-scrambled toy dataset with planar (achiral) templates.
fn planar_dataset(seed: u64, alphabet: u32, sigma_conf: f64) -> Dataset {
    let mut rng = RandomSource::new(seed);
    let classes = (0..8)
        .map(|c| {
            let n = rng.range_inclusive(4, 6);
            let types: Vec<u32> = (0..n).map(|_| rng.index(alphabet as usize) as u32).collect();
            let class_id = format!("c{c:03}");
            let template: Vec<[f64; 3]> = (0..n)
                .map(|_| [rng.normal(), rng.normal(), 0.0])
                .collect();
            let template = center(&Conformation::new(template, types.clone(), class_id.clone()).unwrap()).unwrap();
            let conformers = (0..10)
                .map(|_| {
                    let coords: Vec<[f64; 3]> = template
                        .coords
                        .iter()
                        .map(|r| {
                            [
                                r[0] + rng.normal() * sigma_conf,
                                r[1] + rng.normal() * sigma_conf,
                                r[2] + rng.normal() * sigma_conf,
                            ]
                        })
                        .collect();
                    let conf = Conformation::new(coords, types.clone(), class_id.clone()).unwrap();
                    let g = sample_group_element(&mut rng, &types);
                    center(&apply_group(&g, &conf).unwrap()).unwrap().coords
                })
                .collect();
            DatasetClass { class_id, types, conformers }
        })
        .collect();
    Dataset { classes, metadata: DatasetMetadata::default() }
}

#[allow(clippy::too_many_arguments)]
fn run_planar(space: DriftSpace, variant: AlignVariant, alphabet: u32, steps: usize, lr: f64, seed: u64, sigma_conf: f64, n_classes_per_step: usize) {
    run_planar_full(space, variant, alphabet, steps, lr, seed, sigma_conf, n_classes_per_step, 1.0, Normalization::OneSided);
}

#[allow(clippy::too_many_arguments)]
fn run_planar_full(space: DriftSpace, variant: AlignVariant, alphabet: u32, steps: usize, lr: f64, seed: u64, sigma_conf: f64, n_classes_per_step: usize, out_init: f64, norm: Normalization) {
    run_planar_sched(space, variant, alphabet, steps, lr, seed, sigma_conf, n_classes_per_step, out_init, norm, None);
}

#[allow(clippy::too_many_arguments)]
fn run_planar_sched(space: DriftSpace, variant: AlignVariant, alphabet: u32, steps: usize, lr: f64, seed: u64, sigma_conf: f64, n_classes_per_step: usize, out_init: f64, norm: Normalization, lr_final: Option<f64>) {
    let ds = planar_dataset(seed, alphabet, sigma_conf);
    let config = TrainConfig {
        n_classes_per_step,
        n_pos: 30,
        n_neg: 64,
        learning_rate: lr,
        learning_rate_final: None,
        steps,
        seed,
        drift: DriftConfig {
            temperatures: vec![0.02, 0.05, 0.2],
            normalization: norm,
            space,
            align_strategy: AlignStrategy {
                variant,
                max_iterations: 50,
                init_order: InitOrder::RotationFirst,
            },
            norm_epsilon: 1e-8,
        },
        hidden_widths: vec![128, 128, 128],
        class_embed_dim: 8,
    };
    let t0 = Instant::now();
    let mut rng = RandomSource::new(seed + 1);
    let mut params = GeneratorParams::new(&ds, &config, &mut rng).unwrap();
    for group in params.groups.values_mut() {
        for w in &mut group.net.layers.last_mut().unwrap().weights {
            *w *= out_init;
        }
    }
    // linear lr schedule when lr_final differs from lr
    let lr0 = config.learning_rate;
    let lr1 = lr_final.unwrap_or(lr0);
    let mut config = config;
    let mut losses = Vec::new();
    for step in 0..config.steps {
        let f = step as f64 / config.steps.max(1) as f64;
        config.learning_rate = lr0 + (lr1 - lr0) * f;
        losses.push(symdrift::generator::train_step(&mut params, &ds, &config, &mut rng).unwrap());
    }
    let train_time = t0.elapsed().as_secs_f64();
    let eval = EvalConfig { delta: 3.0 * sigma_conf, samples_per_class_multiplier: 2 };
    let mut srng = RandomSource::new(seed + 2);
    let mut amr_r = 0.0;
    let mut cov_r = 0.0;
    let mut per_class = String::new();
    for class in &ds.classes {
        let refs: Vec<_> = (0..class.conformers.len()).map(|k| class.conformation(k).unwrap()).collect();
        let gen = sample_one_shot(&params, &class.class_id, 2 * refs.len(), &mut srng, SampleSelect::None).unwrap();
        let m = coverage_amr(&gen, &refs, &eval).unwrap();
        amr_r += m.amr_r / 8.0;
        cov_r += m.cov_r / 8.0;
        per_class.push_str(&format!("{:.2}/{:.2} ", m.cov_r, m.amr_r));
    }
    println!(
        "PLANAR space={space:?}/{variant:?} a={alphabet} lr={lr}->{lr_final:?} sc={sigma_conf}: amr_r={amr_r:.4} cov_r={cov_r:.3} perclass={per_class} lossN={:.3e} t={train_time:.0}s",
        losses.last().unwrap(),
    );
}

#[test]
#[ignore]
fn probe_planar_nc8() {
    run_planar(DriftSpace::Embedded, AlignVariant::Iterative, 12, 2000, 0.16, 100, 0.1, 8);
    run_planar(DriftSpace::Embedded, AlignVariant::Iterative, 12, 2000, 0.25, 100, 0.1, 8);
}

#[test]
#[ignore]
fn probe_planar_diverse_init() {
    run_planar_full(DriftSpace::Embedded, AlignVariant::Iterative, 12, 2000, 0.16, 100, 0.1, 8, 4.0, Normalization::OneSided);
    run_planar_full(DriftSpace::Embedded, AlignVariant::Iterative, 12, 2000, 0.16, 100, 0.1, 8, 1.0, Normalization::TwoSided);
    run_planar_full(DriftSpace::Embedded, AlignVariant::Iterative, 12, 2000, 0.16, 100, 0.1, 8, 4.0, Normalization::TwoSided);
}

#[test]
#[ignore]
fn probe_lr_schedule() {
    run_planar_sched(DriftSpace::Embedded, AlignVariant::Iterative, 12, 2000, 0.5, 100, 0.1, 8, 1.0, Normalization::OneSided, Some(0.02));
    run_planar_sched(DriftSpace::Embedded, AlignVariant::Iterative, 12, 2000, 1.0, 100, 0.1, 8, 1.0, Normalization::OneSided, Some(0.02));
}

#[test]
#[ignore]
fn probe_stuck_class_diagnosis() {
    use symdrift::embedding::embed;
    use symdrift::metrics::dmae;
    let sigma_conf = 0.1;
    let ds = planar_dataset(100, 12, sigma_conf);
    let config = TrainConfig {
        n_classes_per_step: 8,
        n_pos: 30,
        n_neg: 64,
        learning_rate: 0.16,
        learning_rate_final: None,
        steps: 2000,
        seed: 100,
        drift: DriftConfig {
            temperatures: vec![0.02, 0.05, 0.2],
            normalization: Normalization::OneSided,
            space: DriftSpace::Embedded,
            align_strategy: AlignStrategy {
                variant: AlignVariant::Iterative,
                max_iterations: 50,
                init_order: InitOrder::RotationFirst,
            },
            norm_epsilon: 1e-8,
        },
        hidden_widths: vec![128, 128, 128],
        class_embed_dim: 8,
    };
    let mut rng = RandomSource::new(101);
    let mut params = GeneratorParams::new(&ds, &config, &mut rng).unwrap();
    let losses = train(&mut params, &ds, &config, &mut rng).unwrap();
    println!("lossN={:.3}", losses.last().unwrap());
    let mut srng = RandomSource::new(102);
    for class in &ds.classes {
        let refs: Vec<_> = (0..10).map(|k| class.conformation(k).unwrap()).collect();
        let gen = sample_one_shot(&params, &class.class_id, 20, &mut srng, SampleSelect::None).unwrap();
        let mut best_rmsd = f64::INFINITY;
        let mut best_bf = f64::INFINITY;
        let mut best_emb = f64::INFINITY;
        let _ = dmae(&refs[0], &refs[1]);
        for g in &gen {
            let ge = embed(g).unwrap().values;
            for r in &refs {
                best_rmsd = best_rmsd.min(symdrift::metrics::rmsd_aligned(g, r).unwrap());
                let bf = symdrift::align::align(g, r, &AlignStrategy::brute_force()).unwrap();
                best_bf = best_bf.min(bf.residual / (g.n_atoms() as f64).sqrt());
                let re = embed(r).unwrap().values;
                let d: f64 = ge.iter().zip(&re).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                best_emb = best_emb.min(d);
            }
        }
        println!(
            "{}: n={} types={:?} best_rmsd={best_rmsd:.3} best_bf_rmsd={best_bf:.3} best_embdist={best_emb:.3}",
            class.class_id,
            class.types.len(),
            class.types,
        );
    }
}

/// Planar orbit-scrambled dataset: half the classes have all-distinct
/// types, half have exactly one duplicated type pair.
fn mixed_dataset(seed: u64, sigma_conf: f64) -> Dataset {
    let mut rng = RandomSource::new(seed);
    let shapes: [(usize, bool); 8] = [
        (4, false), (5, false), (6, false), (5, false),
        (4, true), (4, true), (5, true), (6, true),
    ];
    let classes = shapes
        .iter()
        .enumerate()
        .map(|(c, &(n, with_pair))| {
            let mut pool: Vec<u32> = (0..12).collect();
            rng.shuffle(&mut pool);
            let mut types: Vec<u32> = pool[..n].to_vec();
            if with_pair {
                types[n - 1] = types[0];
            }
            let class_id = format!("c{c:03}");
            let mut template: Vec<[f64; 3]> = (0..n).map(|_| [rng.normal(), rng.normal(), 0.0]).collect();
            if with_pair {
                // keep the duplicated pair close together
                let a = std::f64::consts::TAU * rng.uniform();
                template[n - 1] = [template[0][0] + 0.25 * a.cos(), template[0][1] + 0.25 * a.sin(), 0.0];
            }
            let template = center(&Conformation::new(template, types.clone(), class_id.clone()).unwrap()).unwrap();
            let conformers = (0..10)
                .map(|_| {
                    let coords: Vec<[f64; 3]> = template
                        .coords
                        .iter()
                        .map(|r| [
                            r[0] + rng.normal() * sigma_conf,
                            r[1] + rng.normal() * sigma_conf,
                            r[2] + rng.normal() * sigma_conf,
                        ])
                        .collect();
                    let conf = Conformation::new(coords, types.clone(), class_id.clone()).unwrap();
                    let g = sample_group_element(&mut rng, &types);
                    center(&apply_group(&g, &conf).unwrap()).unwrap().coords
                })
                .collect();
            DatasetClass { class_id, types, conformers }
        })
        .collect();
    Dataset { classes, metadata: DatasetMetadata::default() }
}

#[allow(clippy::too_many_arguments)]
fn run_mixed(space: DriftSpace, variant: AlignVariant, steps: usize, lr: f64, seed: u64, sigma_conf: f64) -> (f64, f64) {
    run_mixed_h(space, variant, steps, lr, seed, sigma_conf, &[128, 128, 128])
}

#[allow(clippy::too_many_arguments)]
fn run_mixed_h(space: DriftSpace, variant: AlignVariant, steps: usize, lr: f64, seed: u64, sigma_conf: f64, hidden: &[usize]) -> (f64, f64) {
    let ds = mixed_dataset(seed, sigma_conf);
    let config = TrainConfig {
        n_classes_per_step: 8,
        n_pos: 30,
        n_neg: 64,
        learning_rate: lr,
        learning_rate_final: None,
        steps,
        seed,
        drift: DriftConfig {
            temperatures: vec![0.02, 0.05, 0.2],
            normalization: Normalization::OneSided,
            space,
            align_strategy: AlignStrategy {
                variant,
                max_iterations: 50,
                init_order: InitOrder::RotationFirst,
            },
            norm_epsilon: 1e-8,
        },
        hidden_widths: hidden.to_vec(),
        class_embed_dim: 8,
    };
    let t0 = Instant::now();
    let mut rng = RandomSource::new(seed + 1);
    let mut params = GeneratorParams::new(&ds, &config, &mut rng).unwrap();
    train(&mut params, &ds, &config, &mut rng).unwrap();
    let train_time = t0.elapsed().as_secs_f64();
    let eval = EvalConfig { delta: 3.0 * sigma_conf, samples_per_class_multiplier: 2 };
    let mut srng = RandomSource::new(seed + 2);
    let mut amr_r = 0.0;
    let mut cov_r = 0.0;
    let mut per_class = String::new();
    for class in &ds.classes {
        let refs: Vec<_> = (0..class.conformers.len()).map(|k| class.conformation(k).unwrap()).collect();
        let gen = sample_one_shot(&params, &class.class_id, 2 * refs.len(), &mut srng, SampleSelect::None).unwrap();
        let m = coverage_amr(&gen, &refs, &eval).unwrap();
        amr_r += m.amr_r / 8.0;
        cov_r += m.cov_r / 8.0;
        per_class.push_str(&format!("{:.2}/{:.2} ", m.cov_r, m.amr_r));
    }
    println!(
        "MIXED space={space:?}/{variant:?} steps={steps} lr={lr} hidden={hidden:?}: amr_r={amr_r:.4} cov_r={cov_r:.3} perclass={per_class} t={train_time:.0}s",
    );
    (amr_r, cov_r)
}

#[test]
#[ignore]
fn probe_mixed_embedded() {
    run_mixed(DriftSpace::Embedded, AlignVariant::Iterative, 2000, 0.16, 100, 0.1);
}

#[test]
#[ignore]
fn probe_variant_split_at_init_and_after() {
    // class with one same-type pair: which swap variant is each sample
    // closest to, at init and after training?
    let sigma_conf = 0.1;
    let ds = mixed_dataset(100, sigma_conf);
    for out_init in [1.0, 4.0] {
        let config = TrainConfig {
            n_classes_per_step: 8,
            n_pos: 30,
            n_neg: 64,
            learning_rate: 0.16,
            learning_rate_final: None,
            steps: 2000,
            seed: 100,
            drift: DriftConfig {
                temperatures: vec![0.02, 0.05, 0.2],
                normalization: Normalization::OneSided,
                space: DriftSpace::Embedded,
                align_strategy: AlignStrategy {
                    variant: AlignVariant::Iterative,
                    max_iterations: 50,
                    init_order: InitOrder::RotationFirst,
                },
                norm_epsilon: 1e-8,
            },
            hidden_widths: vec![128, 128, 128],
            class_embed_dim: 8,
        };
        let mut rng = RandomSource::new(101);
        let mut params = GeneratorParams::new(&ds, &config, &mut rng).unwrap();
        for group in params.groups.values_mut() {
            for w in &mut group.net.layers.last_mut().unwrap().weights {
                *w *= out_init;
            }
        }
        let count_variants = |params: &GeneratorParams, label: &str| {
            for class in ds.classes.iter().filter(|c| {
                let mut t = c.types.clone();
                t.sort_unstable();
                t.windows(2).any(|w| w[0] == w[1])
            }) {
                let template = class.conformation(0).unwrap();
                let mut srng = RandomSource::new(55);
                let gen = sample_one_shot(params, &class.class_id, 20, &mut srng, SampleSelect::None).unwrap();
                let mut identity_side = 0;
                let mut swap_side = 0;
                for g in &gen {
                    let res = symdrift::align::align(g, &template, &AlignStrategy::brute_force()).unwrap();
                    let perm = res.group_element.permutation;
                    if perm.iter().enumerate().all(|(i, &p)| p == i) {
                        identity_side += 1;
                    } else {
                        swap_side += 1;
                    }
                }
                println!("{label} out_init={out_init} {}: identity={identity_side} swapped={swap_side}", class.class_id);
            }
        };
        count_variants(&params, "INIT ");
        let mut trng = RandomSource::new(101);
        let mut p2 = GeneratorParams::new(&ds, &config, &mut trng).unwrap();
        for group in p2.groups.values_mut() {
            for w in &mut group.net.layers.last_mut().unwrap().weights {
                *w *= out_init;
            }
        }
        train(&mut p2, &ds, &config, &mut trng).unwrap();
        count_variants(&p2, "FINAL");
    }
}

#[test]
#[ignore]
fn probe_close_pair_embedded() {
    run_mixed(DriftSpace::Embedded, AlignVariant::Iterative, 2000, 0.16, 100, 0.1);
}

#[test]
#[ignore]
fn probe_close_pair_ordering_short() {
    let e = run_mixed(DriftSpace::Embedded, AlignVariant::Iterative, 800, 0.16, 100, 0.1);
    let r = run_mixed(DriftSpace::Aligned, AlignVariant::RotationOnly, 800, 0.16, 100, 0.1);
    let c = run_mixed(DriftSpace::Cartesian, AlignVariant::Iterative, 800, 0.16, 100, 0.1);
    let i = run_mixed(DriftSpace::Aligned, AlignVariant::Iterative, 800, 0.16, 100, 0.1);
    println!("ORDER amr_r: embedded={:.4} iterative={:.4} rotation={:.4} cartesian={:.4}", e.0, i.0, r.0, c.0);
}

#[test]
#[ignore]
fn probe_capacity_sweep() {
    for hidden in [&[32usize, 32][..], &[16, 16][..]] {
        let e = run_mixed_h(DriftSpace::Embedded, AlignVariant::Iterative, 800, 0.16, 100, 0.1, hidden);
        let r = run_mixed_h(DriftSpace::Aligned, AlignVariant::RotationOnly, 800, 0.16, 100, 0.1, hidden);
        let c = run_mixed_h(DriftSpace::Cartesian, AlignVariant::Iterative, 800, 0.16, 100, 0.1, hidden);
        let i = run_mixed_h(DriftSpace::Aligned, AlignVariant::Iterative, 800, 0.16, 100, 0.1, hidden);
        println!("ORDER hidden={hidden:?} amr_r: embedded={:.4} iterative={:.4} rotation={:.4} cartesian={:.4}", e.0, i.0, r.0, c.0);
    }
}

/// Candidate criterion-7/8 dataset: distinct classes, close-pair classes,
/// and one close-triple class.
fn mixed_dataset2(seed: u64, sigma_conf: f64, d_pair: f64) -> Dataset {
    let mut rng = RandomSource::new(seed);
    // (n_atoms, duplicates) where duplicates is the size of the one
    // repeated-type cluster (1 = all distinct)
    let shapes: [(usize, usize); 8] = [
        (4, 1), (5, 1), (6, 1),
        (4, 2), (5, 2), (6, 2), (5, 2),
        (5, 3),
    ];
    let classes = shapes
        .iter()
        .enumerate()
        .map(|(c, &(n, dup))| {
            let mut pool: Vec<u32> = (0..12).collect();
            rng.shuffle(&mut pool);
            let mut types: Vec<u32> = pool[..n].to_vec();
            for k in 1..dup {
                types[n - k] = types[0];
            }
            let class_id = format!("c{c:03}");
            let mut template: Vec<[f64; 3]> = (0..n).map(|_| [rng.normal(), rng.normal(), 0.0]).collect();
            for k in 1..dup {
                let a = std::f64::consts::TAU * rng.uniform();
                template[n - k] = [template[0][0] + d_pair * a.cos(), template[0][1] + d_pair * a.sin(), 0.0];
            }
            let template = center(&Conformation::new(template, types.clone(), class_id.clone()).unwrap()).unwrap();
            let conformers = (0..10)
                .map(|_| {
                    let coords: Vec<[f64; 3]> = template
                        .coords
                        .iter()
                        .map(|r| [
                            r[0] + rng.normal() * sigma_conf,
                            r[1] + rng.normal() * sigma_conf,
                            r[2] + rng.normal() * sigma_conf,
                        ])
                        .collect();
                    let conf = Conformation::new(coords, types.clone(), class_id.clone()).unwrap();
                    let g = sample_group_element(&mut rng, &types);
                    center(&apply_group(&g, &conf).unwrap()).unwrap().coords
                })
                .collect();
            DatasetClass { class_id, types, conformers }
        })
        .collect();
    Dataset { classes, metadata: DatasetMetadata::default() }
}

#[allow(clippy::too_many_arguments)]
fn run_v2(space: DriftSpace, variant: AlignVariant, steps: usize, lr0: f64, lr1: f64, seed: u64, sigma_conf: f64, hidden: &[usize], d_pair: f64) -> (f64, f64) {
    let ds = mixed_dataset2(seed, sigma_conf, d_pair);
    let mut config = TrainConfig {
        n_classes_per_step: 8,
        n_pos: 30,
        n_neg: 64,
        learning_rate: lr0,
        learning_rate_final: None,
        steps,
        seed,
        drift: DriftConfig {
            temperatures: vec![0.02, 0.05, 0.2],
            normalization: Normalization::OneSided,
            space,
            align_strategy: AlignStrategy {
                variant,
                max_iterations: 50,
                init_order: InitOrder::RotationFirst,
            },
            norm_epsilon: 1e-8,
        },
        hidden_widths: hidden.to_vec(),
        class_embed_dim: 8,
    };
    let t0 = Instant::now();
    let mut rng = RandomSource::new(seed + 1);
    let mut params = GeneratorParams::new(&ds, &config, &mut rng).unwrap();
    for step in 0..steps {
        config.learning_rate = lr0 + (lr1 - lr0) * step as f64 / steps as f64;
        symdrift::generator::train_step(&mut params, &ds, &config, &mut rng).unwrap();
    }
    let train_time = t0.elapsed().as_secs_f64();
    let eval = EvalConfig { delta: 3.0 * sigma_conf, samples_per_class_multiplier: 2 };
    let mut srng = RandomSource::new(seed + 2);
    let mut amr_r = 0.0;
    let mut cov_r = 0.0;
    let mut per_class = String::new();
    for class in &ds.classes {
        let refs: Vec<_> = (0..class.conformers.len()).map(|k| class.conformation(k).unwrap()).collect();
        let gen = sample_one_shot(&params, &class.class_id, 2 * refs.len(), &mut srng, SampleSelect::None).unwrap();
        let m = coverage_amr(&gen, &refs, &eval).unwrap();
        amr_r += m.amr_r / 8.0;
        cov_r += m.cov_r / 8.0;
        per_class.push_str(&format!("{:.2}/{:.2} ", m.cov_r, m.amr_r));
    }
    println!(
        "V2 space={space:?}/{variant:?} steps={steps} lr={lr0}->{lr1} hidden={hidden:?} d={d_pair}: amr_r={amr_r:.4} cov_r={cov_r:.3} perclass={per_class} t={train_time:.0}s",
    );
    (amr_r, cov_r)
}

#[test]
#[ignore]
fn probe_v2_ordering() {
    let h: &[usize] = &[16, 16];
    let e = run_v2(DriftSpace::Embedded, AlignVariant::Iterative, 2000, 0.16, 0.01, 100, 0.1, h, 0.3);
    let i = run_v2(DriftSpace::Aligned, AlignVariant::Iterative, 2000, 0.16, 0.01, 100, 0.1, h, 0.3);
    let r = run_v2(DriftSpace::Aligned, AlignVariant::RotationOnly, 2000, 0.16, 0.01, 100, 0.1, h, 0.3);
    let c = run_v2(DriftSpace::Cartesian, AlignVariant::Iterative, 2000, 0.16, 0.01, 100, 0.1, h, 0.3);
    println!("ORDER-V2 amr_r: embedded={:.4} iterative={:.4} rotation={:.4} cartesian={:.4}", e.0, i.0, r.0, c.0);
}

#[allow(clippy::too_many_arguments)]
fn run_v3(shapes: &[(usize, usize)], space: DriftSpace, variant: AlignVariant, steps: usize, lr0: f64, lr1: f64, seed: u64, sigma_conf: f64, hidden: &[usize], d_pair: f64) -> (f64, f64) {
    let ds = shaped_dataset(shapes, seed, sigma_conf, d_pair);
    let mut config = TrainConfig {
        n_classes_per_step: 8,
        n_pos: 30,
        n_neg: 64,
        learning_rate: lr0,
        learning_rate_final: None,
        steps,
        seed,
        drift: DriftConfig {
            temperatures: vec![0.02, 0.05, 0.2],
            normalization: Normalization::OneSided,
            space,
            align_strategy: AlignStrategy {
                variant,
                max_iterations: 50,
                init_order: InitOrder::RotationFirst,
            },
            norm_epsilon: 1e-8,
        },
        hidden_widths: hidden.to_vec(),
        class_embed_dim: 8,
    };
    let t0 = Instant::now();
    let mut rng = RandomSource::new(seed + 1);
    let mut params = GeneratorParams::new(&ds, &config, &mut rng).unwrap();
    for step in 0..steps {
        config.learning_rate = lr0 + (lr1 - lr0) * step as f64 / steps as f64;
        symdrift::generator::train_step(&mut params, &ds, &config, &mut rng).unwrap();
    }
    let train_time = t0.elapsed().as_secs_f64();
    let eval = EvalConfig { delta: 3.0 * sigma_conf, samples_per_class_multiplier: 2 };
    let mut srng = RandomSource::new(seed + 2);
    let mut amr_r = 0.0;
    let mut cov_r = 0.0;
    let mut per_class = String::new();
    for class in &ds.classes {
        let refs: Vec<_> = (0..class.conformers.len()).map(|k| class.conformation(k).unwrap()).collect();
        let gen = sample_one_shot(&params, &class.class_id, 2 * refs.len(), &mut srng, SampleSelect::None).unwrap();
        let m = coverage_amr(&gen, &refs, &eval).unwrap();
        amr_r += m.amr_r / 8.0;
        cov_r += m.cov_r / 8.0;
        per_class.push_str(&format!("{:.2}/{:.2} ", m.cov_r, m.amr_r));
    }
    println!(
        "V3 space={space:?}/{variant:?} lr={lr0}->{lr1} h={hidden:?} d={d_pair}: amr_r={amr_r:.4} cov_r={cov_r:.3} perclass={per_class} t={train_time:.0}s",
    );
    (amr_r, cov_r)
}

/// (n_atoms, cluster_size): cluster_size atoms share one type and sit in a
/// tight disc of radius d_pair around the first atom.
fn shaped_dataset(shapes: &[(usize, usize)], seed: u64, sigma_conf: f64, d_pair: f64) -> Dataset {
    let mut rng = RandomSource::new(seed);
    let classes = shapes
        .iter()
        .enumerate()
        .map(|(c, &(n, dup))| {
            let mut pool: Vec<u32> = (0..12).collect();
            rng.shuffle(&mut pool);
            let mut types: Vec<u32> = pool[..n].to_vec();
            for k in 1..dup {
                types[n - k] = types[0];
            }
            let class_id = format!("c{c:03}");
            let mut template: Vec<[f64; 3]> = (0..n).map(|_| [rng.normal(), rng.normal(), 0.0]).collect();
            for k in 1..dup {
                let a = std::f64::consts::TAU * (k as f64 / dup as f64 + 0.13 * rng.uniform());
                template[n - k] = [template[0][0] + d_pair * a.cos(), template[0][1] + d_pair * a.sin(), 0.0];
            }
            let template = center(&Conformation::new(template, types.clone(), class_id.clone()).unwrap()).unwrap();
            let conformers = (0..10)
                .map(|_| {
                    let coords: Vec<[f64; 3]> = template
                        .coords
                        .iter()
                        .map(|r| [
                            r[0] + rng.normal() * sigma_conf,
                            r[1] + rng.normal() * sigma_conf,
                            r[2] + rng.normal() * sigma_conf,
                        ])
                        .collect();
                    let conf = Conformation::new(coords, types.clone(), class_id.clone()).unwrap();
                    let g = sample_group_element(&mut rng, &types);
                    center(&apply_group(&g, &conf).unwrap()).unwrap().coords
                })
                .collect();
            DatasetClass { class_id, types, conformers }
        })
        .collect();
    Dataset { classes, metadata: DatasetMetadata::default() }
}

#[test]
#[ignore]
fn probe_v3_ordering() {
    let shapes: [(usize, usize); 8] = [(4, 1), (5, 1), (6, 1), (5, 2), (6, 2), (5, 3), (5, 3), (6, 3)];
    let h: &[usize] = &[16, 16];
    let e = run_v3(&shapes, DriftSpace::Embedded, AlignVariant::Iterative, 2000, 0.16, 0.005, 100, 0.1, h, 0.4);
    let i = run_v3(&shapes, DriftSpace::Aligned, AlignVariant::Iterative, 2000, 0.16, 0.005, 100, 0.1, h, 0.4);
    let r = run_v3(&shapes, DriftSpace::Aligned, AlignVariant::RotationOnly, 2000, 0.16, 0.005, 100, 0.1, h, 0.4);
    let c = run_v3(&shapes, DriftSpace::Cartesian, AlignVariant::Iterative, 2000, 0.16, 0.005, 100, 0.1, h, 0.4);
    println!("ORDER-V3 amr_r: embedded={:.4} iterative={:.4} rotation={:.4} cartesian={:.4}", e.0, i.0, r.0, c.0);
}
