//! Acceptance criteria 1 to 11. Runs as a plain binary so every criterion
//! prints a PASS/FAIL line; exits nonzero if any fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use spikelink::channel::{
    decision_threshold, detect, estimate_ber, sample_pointing_error, transmit, LinkConfig,
    LinkParams,
};
use spikelink::energy::{energy_pj, EnergyTable, OpCounts};
use spikelink::events::{make_dataset, Dataset, Split};
use spikelink::grad::{ParamStore, SpikeMode, SurrogateSpec, Tape, Tensor, Var};
use spikelink::harness::{energy_for, sweep, train, ExperimentConfig};
use spikelink::modem::{ppm_demodulate, ppm_modulate, PpmConfig};
use spikelink::rng;
use spikelink::snn::{
    stochastic_attention, ChannelUse, Graph, LifConfig, LifNeurons, LifState, Model, ModelConfig,
    PassOptions, ReceiveMode,
};
use statrs::distribution::{ContinuousCDF, Normal};

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn eval_link() -> LinkParams {
    LinkConfig::default().to_params().unwrap()
}

fn noiseless(p: LinkParams) -> LinkParams {
    LinkParams {
        noise_floor: 0.0,
        signal_noise_factor: 0.0,
        pointing_variance: 0.0,
        ..p
    }
}

fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut r = rng::stream(seed);
    (0..n).map(|_| r.random_range(0..2u8)).collect()
}

/// Normal-approximation binomial interval at z standard deviations.
fn interval(errors: u64, bits: u64, z: f64) -> (f64, f64) {
    let p = errors as f64 / bits as f64;
    let half = z * (p * (1.0 - p) / bits as f64).sqrt();
    (p - half, p + half)
}

fn c1_fading() -> Outcome {
    let start = Instant::now();
    let g = 1e6;
    let mut worst = 0.0f64;
    for (i, s2g) in [0.1, 0.3, 0.5].into_iter().enumerate() {
        let mut r = rng::stream(rng::derive_indexed(11, "fading", i as u64));
        let e = sample_pointing_error(s2g / g, 1_000_000, &mut r).map_err(|e| e.to_string())?;
        let mean = e.iter().map(|&e| (-g * e).exp()).sum::<f64>() / e.len() as f64;
        let expect = (1.0 + s2g).powi(-2);
        worst = worst.max((mean - expect).abs() / expect);
    }
    let t = start.elapsed();
    check(
        worst <= 0.01 && t < Duration::from_secs(10),
        format!(
            "max rel err {worst:.2e} (tol 1e-2), {:.2}s (limit 10s)",
            t.as_secs_f64()
        ),
    )
}

fn c2_noiseless_and_monotone() -> Outcome {
    let p = noiseless(eval_link());
    let bits = random_bits(10_000, 21);
    let (y, _) = transmit(&bits, &p, 22).map_err(|e| e.to_string())?;
    let errors = detect(&y, decision_threshold(&p))
        .iter()
        .zip(&bits)
        .filter(|(a, b)| a != b)
        .count();
    let grid = [2e-5, 5e-5, 1e-4];
    let mut cis = Vec::new();
    for (i, &n0) in grid.iter().enumerate() {
        let params = LinkParams {
            noise_floor: n0,
            ..eval_link()
        };
        let est = estimate_ber(&params, 1_000_000, rng::derive_indexed(23, "ber", i as u64))
            .map_err(|e| e.to_string())?;
        cis.push((est.rate(), interval(est.errors, est.bits, 2.576)));
    }
    let separated = cis.windows(2).all(|w| w[0].1 .1 < w[1].1 .0);
    let rates: Vec<String> = cis.iter().map(|c| format!("{:.3e}", c.0)).collect();
    check(
        errors == 0 && separated,
        format!(
            "{errors} errors on 10^4 noiseless bits; BER over noise floor {grid:?} = [{}], 99% intervals disjoint: {separated}",
            rates.join(", ")
        ),
    )
}

/// ½·P(y > θ | 0) + ½·P(y ≤ θ | 1), integrating the '1' branch over
/// e ~ Gamma(2, σ²) with Simpson's rule.
fn semi_analytic_ber(p: &LinkParams) -> f64 {
    let std_normal = Normal::new(0.0, 1.0).unwrap();
    let theta = decision_threshold(p);
    let level = p.on_level();
    let p0 = 1.0 - std_normal.cdf(theta / p.noise_floor.sqrt());
    let s2g = p.normalized_pointing();
    let miss = |u: f64| {
        let s = level * (-s2g * u).exp();
        let sd = (p.noise_floor + p.signal_noise_factor * s).sqrt();
        std_normal.cdf((theta - s) / sd) * u * (-u).exp()
    };
    let (hi, n) = (60.0, 20_000);
    let h = hi / n as f64;
    let mut acc = miss(0.0) + miss(hi);
    for i in 1..n {
        acc += miss(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    0.5 * p0 + 0.5 * acc * h / 3.0
}

fn c3_ber_oracle() -> Outcome {
    let start = Instant::now();
    let p = LinkParams {
        noise_floor: 2e-5,
        ..eval_link()
    }
    .with_normalized_pointing(0.3)
    .map_err(|e| e.to_string())?;
    let oracle = semi_analytic_ber(&p);
    let n = 1_000_000u64;
    let est = estimate_ber(&p, n, 31).map_err(|e| e.to_string())?;
    let half = 2.576 * (oracle * (1.0 - oracle) / n as f64).sqrt();
    let t = start.elapsed();
    check(
        (est.rate() - oracle).abs() <= half && t < Duration::from_secs(60),
        format!(
            "sigma2G=0.3, noise floor 2e-5: MC {:.4e} vs quadrature {:.4e} ± {:.1e} (99%), {:.2}s",
            est.rate(),
            oracle,
            half,
            t.as_secs_f64()
        ),
    )
}

fn c4_ppm() -> Outcome {
    let mut r = rng::stream(41);
    for m in [2, 4, 8, 16] {
        let cfg = PpmConfig::new(m).unwrap();
        let k = cfg.bits_per_symbol();
        for _ in 0..10_000 {
            let len = k * r.random_range(1..64);
            let bits: Vec<u8> = (0..len).map(|_| r.random_range(0..2u8)).collect();
            let slots = ppm_modulate(&bits, cfg).map_err(|e| e.to_string())?;
            let back = ppm_demodulate(&slots, cfg).map_err(|e| e.to_string())?;
            if back != bits {
                return Err(format!("M={m}: mismatch on {bits:?}"));
            }
        }
    }
    Ok("4 × 10^4 bitstreams recovered exactly for M in {2, 4, 8, 16}".into())
}

fn c5_lif() -> Outcome {
    let mut n = LifNeurons::new(
        1,
        LifConfig {
            beta: 0.5,
            threshold: 1.0,
        },
    );
    let mut spikes = Vec::new();
    let mut potentials = Vec::new();
    for _ in 0..3 {
        spikes.extend(n.step(&[0.6]).map_err(|e| e.to_string())?);
        potentials.push(n.potential[0]);
    }
    // 0.5·0.6 + 0.6 is 0.8999999999999999 in binary floating point.
    let trace_ok = spikes == [0, 0, 1] && potentials == [0.6, 0.5 * 0.6 + 0.6, 0.0];
    let mut r = rng::stream(51);
    let mut violations = 0;
    for _ in 0..10_000 {
        let cfg = LifConfig {
            beta: r.random_range(0.0..1.0),
            threshold: r.random_range(0.1..2.0),
        };
        let mut n = LifNeurons::new(4, cfg);
        for _ in 0..r.random_range(1..20) {
            let prev = n.potential.clone();
            let i: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..2.0)).collect();
            let o = n.step(&i).map_err(|e| e.to_string())?;
            for j in 0..4 {
                let pre = cfg.beta * prev[j] + i[j];
                let expect = if o[j] == 1 { 0.0 } else { pre };
                if n.potential[j] != expect || (o[j] == 1) != (pre >= cfg.threshold) {
                    violations += 1;
                }
            }
        }
    }
    check(
        trace_ok && violations == 0,
        format!("spikes {spikes:?}, potentials {potentials:?}; {violations} reset violations over 10^4 sequences"),
    )
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = a
        .iter()
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt()
        .max(b.iter().map(|x| x * x).sum::<f64>().sqrt());
    diff / scale.max(1e-12)
}

/// Two LIF layers unrolled over T = 5 in relaxed mode; loss = Σ_t ⟨c, h2_t⟩.
fn lif_net(tape: &mut Tape, inputs: &[Tensor], w1: Var, w2: Var, proj: &Tensor) -> Var {
    let cfg = LifConfig {
        beta: 0.8,
        threshold: 1.0,
    };
    let sur = SurrogateSpec::fast_sigmoid(2.0).unwrap();
    let (mut l1, mut l2) = (LifState::new(cfg, sur), LifState::new(cfg, sur));
    let c = tape.input(proj.clone());
    let mut total: Option<Var> = None;
    for x in inputs {
        let x = tape.input(x.clone());
        let a = tape.matmul(x, w1).unwrap();
        let h1 = l1.step(tape, a).unwrap();
        let b = tape.matmul(h1, w2).unwrap();
        let h2 = l2.step(tape, b).unwrap();
        let weighted = tape.mul(h2, c).unwrap();
        let s = tape.sum(weighted);
        total = Some(match total {
            Some(t) => tape.add(t, s).unwrap(),
            None => s,
        });
    }
    total.unwrap()
}

fn c6_gradients() -> Outcome {
    let mut worst = 0.0f64;
    for draw in 0..20u64 {
        let mut r = rng::stream(rng::derive_indexed(61, "draw", draw));
        let mut rand_t = |shape: &[usize], lo: f64, hi: f64| {
            let n = shape.iter().product();
            Tensor::new(shape, (0..n).map(|_| r.random_range(lo..hi)).collect()).unwrap()
        };
        let inputs: Vec<Tensor> = (0..5).map(|_| rand_t(&[2, 3], 0.0, 1.5)).collect();
        let w1 = rand_t(&[3, 4], -1.0, 1.5);
        let w2 = rand_t(&[4, 2], -1.0, 1.5);
        let proj = rand_t(&[2, 2], -1.0, 1.0);
        let loss_at = |a: &Tensor, b: &Tensor| {
            let mut tape = Tape::new(SpikeMode::Relaxed);
            let (va, vb) = (tape.leaf(a.clone()), tape.leaf(b.clone()));
            let l = lif_net(&mut tape, &inputs, va, vb, &proj);
            tape.value(l).item()
        };
        let mut tape = Tape::new(SpikeMode::Relaxed);
        let (v1, v2) = (tape.leaf(w1.clone()), tape.leaf(w2.clone()));
        let l = lif_net(&mut tape, &inputs, v1, v2, &proj);
        let grads = tape.backward(l).map_err(|e| e.to_string())?;
        let h = 1e-6;
        for (which, var) in [(0, v1), (1, v2)] {
            let analytic = grads.get(var).map(|g| g.into_data()).unwrap_or_default();
            let base = if which == 0 { &w1 } else { &w2 };
            let fd: Vec<f64> = (0..base.len())
                .map(|j| {
                    let shifted = |d: f64| {
                        let mut t = base.clone();
                        t.data_mut()[j] += d;
                        if which == 0 {
                            loss_at(&t, &w2)
                        } else {
                            loss_at(&w1, &t)
                        }
                    };
                    (shifted(h) - shifted(-h)) / (2.0 * h)
                })
                .collect();
            if analytic.len() != fd.len() {
                return Err(format!("draw {draw}: missing gradient for weight {which}"));
            }
            worst = worst.max(rel_err(&analytic, &fd));
        }
    }
    check(
        worst <= 1e-3,
        format!("max relative error {worst:.2e} over 20 draws (tol 1e-3)"),
    )
}

fn c7_attention() -> Outcome {
    let n = 10_000;
    let store = ParamStore::new();
    let mut g = Graph::new(&store, PassOptions::eval(71));
    let mut lines = Vec::new();
    let mut ok = true;
    // One token, D_K = 4, V = 1: A ~ Bern(M) = M, and M ~ Bern(matches/4).
    for (matches, p) in [(0, 0.0), (1, 0.25), (2, 0.5), (4, 1.0)] {
        let q = g.tape.input(Tensor::full(&[n, 1, 4], 1.0));
        let krow: Vec<f64> = (0..4)
            .map(|d| if d < matches { 1.0 } else { 0.0 })
            .collect();
        let k = g
            .tape
            .input(Tensor::new(&[n, 1, 4], krow.repeat(n)).unwrap());
        let v = g.tape.input(Tensor::full(&[n, 1, 4], 1.0));
        let a = stochastic_attention(&mut g, q, k, v, 1, "probe").map_err(|e| e.to_string())?;
        let mean = g.tape.value(a).data().chunks(4).map(|c| c[0]).sum::<f64>() / n as f64;
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        let pass = if p == 0.0 || p == 1.0 {
            mean == p
        } else {
            (mean - p).abs() <= 4.0 * sd
        };
        ok &= pass;
        lines.push(format!("p={p}: {mean:.4}"));
    }
    check(ok, format!("{} over 10^4 draws", lines.join(", ")))
}

fn c8_binarity() -> Outcome {
    let cfg = ModelConfig {
        init_gain: 4.0,
        ..ModelConfig::default()
    };
    let link = eval_link().with_normalized_pointing(0.3).unwrap();
    let per = cfg.encoder.timesteps * cfg.encoder.height * cfg.encoder.width;
    for i in 0..100u64 {
        let model = Model::init(cfg, rng::derive_indexed(81, "init", i % 10)).unwrap();
        let mut r = rng::stream(rng::derive_indexed(81, "input", i));
        let density = r.random_range(0.0..1.0);
        let frame: Vec<i8> = (0..per)
            .map(|_| {
                if r.random_bool(density) {
                    if r.random_bool(0.5) {
                        1
                    } else {
                        -1
                    }
                } else {
                    0
                }
            })
            .collect();
        let options = PassOptions {
            check_binary: true,
            ..PassOptions::train(i)
        };
        let mut g = Graph::new(&model.store, options);
        let channel = ChannelUse::Link {
            params: link,
            receive: ReceiveMode::Hard,
            seed: i,
        };
        let f = model
            .forward(&mut g, &[&frame], &channel)
            .map_err(|e| format!("input {i}: {e}"))?;
        for v in f.encoded.iter().chain(&f.transmitted).chain(&f.received) {
            if !g.tape.value(*v).is_binary() {
                return Err(format!("input {i}: non-binary spike tensor"));
            }
        }
    }
    Ok("100 random inputs, hard path with hard receive: all spike tensors in {0, 1}".into())
}

struct Trained {
    cfg: ExperimentConfig,
    data: Dataset,
    model: Model,
}

const DESK_CONFIG: &str = include_str!(concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../../configs/desk.json"
));

fn c9_learning(slot: &mut Option<Trained>) -> Outcome {
    let cfg = ExperimentConfig::from_json(DESK_CONFIG.as_bytes()).map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let (data, outcome) = pool
        .install(|| {
            let d = &cfg.dataset;
            let data = make_dataset(
                d.classes,
                d.per_class,
                &d.dvs,
                rng::derive_seed(cfg.seed, "dataset"),
            )?;
            let out = train(&cfg, &data, |e| {
                eprintln!(
                    "  epoch {:>3}  loss {:.4}  train {:.3}  eval {:.3}",
                    e.epoch, e.loss, e.train_accuracy, e.eval_accuracy
                )
            })?;
            Ok::<_, spikelink::Error>((data, out))
        })
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed().as_secs_f64();
    let eval_cfg = ExperimentConfig {
        evaluation: spikelink::harness::EvalConfig {
            sigma2g_grid: vec![0.0, 0.5],
            seeds: 3,
            ..cfg.evaluation.clone()
        },
        ..cfg.clone()
    };
    let samples: Vec<_> = data.split(Split::Eval).collect();
    let points = sweep(&eval_cfg, &outcome.best, &samples).map_err(|e| e.to_string())?;
    let (a0, a5) = (points[0].mean_accuracy, points[1].mean_accuracy);
    let ok = outcome.best_eval_accuracy >= 0.9 && elapsed <= 600.0 && a5 <= a0 - 0.05;
    let detail = format!(
        "best eval accuracy {:.3} at epoch {} after {:.0}s on one thread (limit 600s); 3-seed mean at sigma2G=0: {:.3}, at 0.5: {:.3}",
        outcome.best_eval_accuracy, outcome.best_epoch, elapsed, a0, a5
    );
    *slot = Some(Trained {
        cfg,
        data,
        model: outcome.best,
    });
    check(ok, detail)
}

fn c10_energy(trained: Option<&Trained>) -> Outcome {
    let table = EnergyTable::default();
    let counts = OpCounts {
        accumulates: 1234,
        macs: 567,
        comparisons: 89,
        random_draws: 10,
        mem_reads: 1111,
        mem_writes: 222,
    };
    let base = energy_pj(&counts, &table);
    let doubled = energy_pj(&(counts + counts), &table);
    let scaled = energy_pj(&counts, &table.scaled(2.0));
    let linear = doubled == 2.0 * base && scaled == 2.0 * base;

    // Trained model on the evaluation split, plus untrained models on
    // sparser and denser copies of the data.
    let mut cases = Vec::new();
    let cfg = trained.map(|t| t.cfg.clone()).unwrap_or_default();
    if let Some(t) = trained {
        let r = energy_for(&t.cfg, &t.model, &t.data).map_err(|e| e.to_string())?;
        cases.push(("trained", r));
    }
    let d = &cfg.dataset;
    for (label, threshold) in [
        ("init, threshold 0.1", 0.1),
        ("init, threshold 0.3", 0.3),
        ("init, threshold 0.5", 0.5),
        ("init, threshold 0.8", 0.8),
    ] {
        let dvs = spikelink::events::DvsConfig { threshold, ..d.dvs };
        let data = make_dataset(d.classes, 8, &dvs, 101).map_err(|e| e.to_string())?;
        let mut mcfg = cfg.model;
        mcfg.init_gain = 4.0;
        let model = Model::init(mcfg, 102).map_err(|e| e.to_string())?;
        let ecfg = ExperimentConfig {
            dataset: spikelink::harness::DatasetConfig { dvs, ..*d },
            ..cfg.clone()
        };
        let r = energy_for(&ecfg, &model, &data).map_err(|e| e.to_string())?;
        cases.push((label, r));
    }
    let mut ok = linear;
    let mut qualifying = 0;
    let mut lines = Vec::new();
    for (label, r) in &cases {
        let enc = r
            .stages
            .iter()
            .find(|s| s.stage == spikelink::snn::Stage::Encoder)
            .ok_or("no encoder stage")?;
        let ratio = enc.spiking_pj / enc.dense_pj;
        if enc.input_spike_rate <= 0.15 {
            qualifying += 1;
            ok &= ratio <= 0.2;
        }
        lines.push(format!(
            "{label}: rate {:.3}, spiking/dense {:.3}",
            enc.input_spike_rate, ratio
        ));
    }
    ok &= qualifying > 0;
    check(ok, format!("linear: {linear}; {}", lines.join("; ")))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_spikelink"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stdout)
        ));
    }
    Ok(())
}

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c11_determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg_path = tmp.path().join("tiny.json");
    std::fs::write(&cfg_path, TINY_CONFIG).map_err(|e| e.to_string())?;
    let cfg = cfg_path.to_str().unwrap();
    let mut runs = Vec::new();
    for run in ["a", "b"] {
        let out = tmp.path().join(run);
        let out = out.to_str().unwrap();
        for cmd in ["generate-dataset", "train", "eval-sweep", "ber", "energy"] {
            run_cli(&[cmd, "--config", cfg, "--seed", "5", "--out", out])?;
        }
        runs.push(csv_files(Path::new(out)));
    }
    let names: Vec<&str> = runs[0].iter().map(|(n, _)| n.as_str()).collect();
    check(
        names.len() == 5 && runs[0] == runs[1],
        format!(
            "{} CSV files byte-identical across two runs: {}",
            names.len(),
            names.join(", ")
        ),
    )
}

const TINY_CONFIG: &str = r#"{
  "dataset": {"classes": 2, "per_class": 4,
              "dvs": {"height": 16, "width": 16, "timesteps": 3, "scene_size": 24}},
  "model": {"encoder": {"height": 16, "width": 16, "timesteps": 3, "dim": 8, "lth_k": 2},
            "decoder": {"embed_dim": 8, "heads": 2, "ffn_hidden": 8, "classes": 2}},
  "training": {"epochs": 2, "batch_size": 4},
  "evaluation": {"sigma2g_grid": [0.0, 0.5], "seeds": 2},
  "ber": {"sigma2g_grid": [0.0, 0.3], "noise_floor_grid": [1e-5], "bits": 2000},
  "energy": {"samples": 4}
}"#;

fn main() {
    let mut trained = None;
    let criteria: Vec<Criterion> = vec![
        ("channel fading mean", Box::new(c1_fading)),
        (
            "noiseless roundtrip and BER monotonicity",
            Box::new(c2_noiseless_and_monotone),
        ),
        ("semi-analytic BER", Box::new(c3_ber_oracle)),
        ("PPM identity", Box::new(c4_ppm)),
        ("LIF oracle", Box::new(c5_lif)),
        ("gradient fidelity", Box::new(c6_gradients)),
        ("stochastic attention statistics", Box::new(c7_attention)),
        ("binarity sweep", Box::new(c8_binarity)),
    ];
    let mut failed = 0;
    let mut report = |n: usize, name: &str, outcome: std::thread::Result<Outcome>| {
        let outcome = outcome.unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {d}")
            }
        }
    };
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        report(i + 1, name, panic::catch_unwind(AssertUnwindSafe(f)));
    }
    let r = panic::catch_unwind(AssertUnwindSafe(|| c9_learning(&mut trained)));
    report(9, "end-to-end desk-scale learning", r);
    let r = panic::catch_unwind(AssertUnwindSafe(|| c10_energy(trained.as_ref())));
    report(10, "energy trend and linearity", r);
    report(11, "determinism", panic::catch_unwind(c11_determinism));
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
