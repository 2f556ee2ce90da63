use rand::Rng;
use spikelink::grad::{ParamStore, Tensor, Var};
use spikelink::rng;
use spikelink::snn::{
    embed, encoder_forward, patch_split, patch_tokens, pool_classify, predict, stmixer_block,
    stochastic_attention, ChannelUse, Graph, LifState, Model, ModelConfig, PassOptions,
    ReceiveMode,
};

fn small_config() -> ModelConfig {
    let mut cfg = ModelConfig::default();
    cfg.encoder.height = 16;
    cfg.encoder.width = 16;
    cfg.encoder.patch = 8;
    cfg.encoder.dim = 8;
    cfg.encoder.timesteps = 3;
    cfg.encoder.lth_k = 2;
    cfg.decoder.embed_dim = 8;
    cfg.decoder.heads = 2;
    cfg.decoder.ffn_hidden = 8;
    cfg
}

fn checked(seed: u64) -> PassOptions {
    PassOptions {
        check_binary: true,
        ..PassOptions::eval(seed)
    }
}

fn zero_all(store: &mut ParamStore) {
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        if store.is_trainable(id) {
            let z = Tensor::zeros(store.value(id).shape());
            store.set_value(id, z).unwrap();
        }
    }
}

fn random_frames(cfg: &ModelConfig, density: f64, seed: u64) -> Vec<i8> {
    let e = &cfg.encoder;
    let mut r = rng::stream(seed);
    (0..e.timesteps * e.height * e.width)
        .map(|_| {
            let u: f64 = r.random();
            if u < density / 2.0 {
                1
            } else if u < density {
                -1
            } else {
                0
            }
        })
        .collect()
}

fn random_spikes(shape: &[usize], rate: f64, seed: u64) -> Tensor {
    let mut r = rng::stream(seed);
    let n = shape.iter().product();
    Tensor::new(
        shape,
        (0..n)
            .map(|_| f64::from(u8::from(r.random::<f64>() < rate)))
            .collect(),
    )
    .unwrap()
}

#[test]
fn patch_tokens_place_polarities() {
    let cfg = small_config();
    let e = &cfg.encoder;
    let mut frames = vec![0i8; e.timesteps * e.height * e.width];
    // +1 at (row 1, col 9) of step 0: token 1, inner 1·8 + 1.
    frames[16 + 9] = 1;
    // −1 at (row 8, col 0) of step 2: token 2, negative channel.
    frames[2 * 256 + 8 * 16] = -1;
    let t = patch_tokens(&[&frames], e).unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(t[0].shape(), &[1, 4, 128]);
    let nz0: Vec<usize> = (0..t[0].len()).filter(|&i| t[0].data()[i] != 0.0).collect();
    assert_eq!(nz0, vec![128 + 9]);
    assert_eq!(t[1].sum(), 0.0);
    let nz2: Vec<usize> = (0..t[2].len()).filter(|&i| t[2].data()[i] != 0.0).collect();
    assert_eq!(nz2, vec![2 * 128 + 64]);
    assert!(patch_tokens(&[&frames[1..]], e).is_err());
}

#[test]
fn patch_split_zero_and_locality() {
    let cfg = small_config();
    let model = Model::init(cfg, 3).unwrap();
    let e = &cfg.encoder;

    let zeros = vec![0i8; e.timesteps * e.height * e.width];
    let mut g = Graph::new(&model.store, checked(0));
    let tokens = patch_tokens(&[&zeros], e).unwrap();
    let mut state = LifState::new(cfg.lif.encoder, cfg.surrogate);
    for (t, tok) in tokens.into_iter().enumerate() {
        let x = g.tape.input(tok);
        let o = patch_split(&mut g, x, &model.weights.patch, &mut state, t).unwrap();
        assert_eq!(g.tape.value(o).sum(), 0.0);
    }

    // An event in patch 0 changes only token 0. A large gain makes the
    // single event visible.
    let mut one = zeros.clone();
    one[0] = 1;
    let mut store = model.store.clone();
    let w = store.value(model.weights.patch.w).map(|v| 10.0 * v);
    store.set_value(model.weights.patch.w, w).unwrap();
    let mut g = Graph::new(&store, checked(0));
    let a = g.tape.input(patch_tokens(&[&zeros], e).unwrap().remove(0));
    let b = g.tape.input(patch_tokens(&[&one], e).unwrap().remove(0));
    let mut sa = LifState::new(cfg.lif.encoder, cfg.surrogate);
    let mut sb = LifState::new(cfg.lif.encoder, cfg.surrogate);
    let oa = patch_split(&mut g, a, &model.weights.patch, &mut sa, 0).unwrap();
    let ob = patch_split(&mut g, b, &model.weights.patch, &mut sb, 0).unwrap();
    let (va, vb) = (g.tape.value(oa).data(), g.tape.value(ob).data());
    let d = e.dim;
    assert_eq!(va[d..], vb[d..]);
    assert_ne!(va[..d], vb[..d]);
}

#[test]
fn encoder_output_is_binary_for_random_inputs() {
    let cfg = small_config();
    for seed in 0..10 {
        let model = Model::init(cfg, seed).unwrap();
        let frames = random_frames(&cfg, 0.2, seed + 100);
        let mut g = Graph::new(&model.store, checked(seed));
        let tokens: Vec<Var> = patch_tokens(&[&frames, &frames], &cfg.encoder)
            .unwrap()
            .into_iter()
            .map(|t| g.tape.input(t))
            .collect();
        let out = encoder_forward(&mut g, &tokens, &model.weights, &cfg).unwrap();
        assert_eq!(out.len(), cfg.encoder.timesteps);
        for o in out {
            assert_eq!(g.tape.shape(o), &[2, 4, 8]);
            assert!(g.tape.value(o).is_binary());
        }
    }
}

#[test]
fn stmixer_zero_weights_is_identity() {
    let cfg = small_config();
    let mut model = Model::init(cfg, 1).unwrap();
    zero_all(&mut model.store);
    let x = random_spikes(&[2, 4, 8], 0.4, 5);
    let mut g = Graph::new(&model.store, checked(0));
    let xv = g.tape.input(x.clone());
    let mut s = std::array::from_fn(|_| LifState::new(cfg.lif.encoder, cfg.surrogate));
    let out = stmixer_block(&mut g, xv, &model.weights.blocks[0], &mut s, 0, 0).unwrap();
    assert_eq!(g.tape.value(out), &x);
}

#[test]
fn stmixer_binary_over_random_weights() {
    let cfg = small_config();
    for seed in 0..100 {
        let model = Model::init(cfg, seed).unwrap();
        let mut g = Graph::new(
            &model.store,
            PassOptions {
                training: true,
                ..checked(seed)
            },
        );
        let mut s = std::array::from_fn(|_| LifState::new(cfg.lif.encoder, cfg.surrogate));
        for t in 0..2 {
            let x = g.tape.input(random_spikes(&[2, 4, 8], 0.3, seed * 7 + t));
            let out =
                stmixer_block(&mut g, x, &model.weights.blocks[0], &mut s, 0, t as usize).unwrap();
            assert_eq!(g.tape.shape(out), &[2, 4, 8]);
            assert!(g.tape.value(out).is_binary());
        }
    }
}

#[test]
fn stmixer_token_permutation_equivariance() {
    let cfg = small_config();
    let perm = [2usize, 0, 3, 1];
    let (n, d) = (4, 8);
    for seed in 0..20 {
        let model = Model::init(cfg, seed).unwrap();
        let block = model.weights.blocks[0];
        let mut permuted = model.store.clone();
        let w = model.store.value(block.w_tm);
        let pw: Vec<f64> = (0..n * n)
            .map(|k| w.data()[perm[k / n] * n + perm[k % n]])
            .collect();
        permuted
            .set_value(block.w_tm, Tensor::new(&[n, n], pw).unwrap())
            .unwrap();

        let x = random_spikes(&[1, n, d], 0.4, seed + 50);
        let px: Vec<f64> = (0..n * d)
            .map(|k| x.data()[perm[k / d] * d + k % d])
            .collect();
        let px = Tensor::new(&[1, n, d], px).unwrap();

        let run = |store: &ParamStore, input: Tensor| {
            let mut g = Graph::new(store, checked(0));
            let mut s = std::array::from_fn(|_| LifState::new(cfg.lif.encoder, cfg.surrogate));
            let xv = g.tape.input(input);
            let o = stmixer_block(&mut g, xv, &block, &mut s, 0, 0).unwrap();
            g.tape.value(o).data().to_vec()
        };
        let base = run(&model.store, x);
        let moved = run(&permuted, px);
        for i in 0..n {
            assert_eq!(
                moved[i * d..(i + 1) * d],
                base[perm[i] * d..(perm[i] + 1) * d],
                "seed {seed} token {i}"
            );
        }
    }
}

#[test]
fn embed_cases() {
    let cfg = small_config();
    let mut model = Model::init(cfg, 2).unwrap();
    zero_all(&mut model.store);
    let dw = model.weights.decoder.clone();
    let s = Tensor::zeros(&[1, 4, 8]);

    let mut g = Graph::new(&model.store, checked(0));
    let mut st = LifState::new(cfg.lif.decoder, cfg.surrogate);
    for _ in 0..10 {
        let x = g.tape.input(s.clone());
        let o = embed(&mut g, x, &dw, &mut st).unwrap();
        assert_eq!(g.tape.value(o).sum(), 0.0);
    }

    let mut loud = model.store.clone();
    loud.set_value(dw.p_e, Tensor::full(&[4, 8], 5.0)).unwrap();
    let mut g = Graph::new(&loud, checked(0));
    let mut st = LifState::new(cfg.lif.decoder, cfg.surrogate);
    let x = g.tape.input(s.clone());
    let o = embed(&mut g, x, &dw, &mut st).unwrap();
    assert!(g.tape.value(o).data().iter().all(|&v| v == 1.0));

    // Binary input and the same values delivered as soft symbols agree.
    let model = Model::init(cfg, 4).unwrap();
    let bits = random_spikes(&[1, 4, 8], 0.5, 9);
    let soft = Tensor::new(&[1, 4, 8], bits.data().to_vec()).unwrap();
    let outs: Vec<Vec<f64>> = [bits, soft]
        .into_iter()
        .map(|t| {
            let mut g = Graph::new(&model.store, checked(0));
            let mut st = LifState::new(cfg.lif.decoder, cfg.surrogate);
            let x = g.tape.input(t);
            let o = embed(&mut g, x, &model.weights.decoder, &mut st).unwrap();
            g.tape.value(o).data().to_vec()
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
}

fn attention_mean(q: &[f64], k: &[f64], v: &[f64], l: usize, dk: usize, draws: usize) -> Vec<f64> {
    let store = ParamStore::new();
    let mut g = Graph::new(
        &store,
        PassOptions {
            record: true,
            ..checked(11)
        },
    );
    let tile = |row: &[f64]| {
        Tensor::new(
            &[draws, l, dk],
            row.iter().copied().cycle().take(draws * l * dk).collect(),
        )
        .unwrap()
    };
    let (qv, kv, vv) = (
        g.tape.input(tile(q)),
        g.tape.input(tile(k)),
        g.tape.input(tile(v)),
    );
    let a = stochastic_attention(&mut g, qv, kv, vv, 1, "attention").unwrap();
    let rec = g.recording.as_ref().unwrap();
    assert!(rec.prob_min.unwrap() >= 0.0 && rec.prob_max.unwrap() <= 1.0);
    let out = g.tape.value(a).data();
    (0..l * dk)
        .map(|j| out.iter().skip(j).step_by(l * dk).sum::<f64>() / draws as f64)
        .collect()
}

#[test]
fn attention_degenerate_probabilities() {
    // Q = K = V = 1: M = 1 and A = 1 with certainty.
    let m = attention_mean(&[1.0; 4], &[1.0; 4], &[1.0; 4], 2, 2, 100);
    assert!(m.iter().all(|&v| v == 1.0));
    // Q = 0: nothing is attended.
    let m = attention_mean(&[0.0; 4], &[1.0; 4], &[1.0; 4], 2, 2, 100);
    assert!(m.iter().all(|&v| v == 0.0));
}

#[test]
fn attention_half_probability() {
    // Q row [1, 0], K row [1, 1], D_K = 2: M ~ Bern(1/2); V = 1 makes A = M.
    let n = 10_000;
    let m = attention_mean(&[1.0, 0.0], &[1.0, 1.0], &[1.0, 1.0], 1, 2, n);
    let sigma = (0.25 / n as f64).sqrt();
    for v in m {
        assert!((v - 0.5).abs() <= 4.0 * sigma, "{v}");
    }
}

#[test]
fn pool_classify_hand_arithmetic() {
    let mut store = ParamStore::new();
    let w = store
        .add(
            "w_cls",
            Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            true,
        )
        .unwrap();
    let zero = store.add("zero", Tensor::zeros(&[2, 2]), true).unwrap();
    let mut g = Graph::new(&store, checked(0));
    let e1 = g
        .tape
        .input(Tensor::new(&[1, 2, 2], vec![1.0, 0.0, 1.0, 1.0]).unwrap());
    let e2 = g
        .tape
        .input(Tensor::new(&[1, 2, 2], vec![0.0, 0.0, 0.0, 1.0]).unwrap());
    // Token means [1, 0.5] and [0, 0.5]; their average [0.5, 0.5] times W.
    let z = pool_classify(&mut g, &[e1, e2], w).unwrap();
    assert_eq!(g.tape.value(z).data(), &[2.0, 3.0]);

    let single = pool_classify(&mut g, &[e1], w).unwrap();
    let repeated = pool_classify(&mut g, &[e1, e1, e1], w).unwrap();
    assert_eq!(g.tape.value(single).data(), g.tape.value(repeated).data());

    let z0 = pool_classify(&mut g, &[e1, e2], zero).unwrap();
    assert_eq!(g.tape.value(z0).data(), &[0.0, 0.0]);
    assert!(pool_classify(&mut g, &[], w).is_err());
}

#[test]
fn zero_model_gives_zero_logits() {
    let cfg = small_config();
    let mut model = Model::init(cfg, 8).unwrap();
    zero_all(&mut model.store);
    let frames = random_frames(&cfg, 0.3, 1);
    let mut g = Graph::new(&model.store, checked(0));
    let f = model
        .forward(&mut g, &[&frames], &ChannelUse::Ideal)
        .unwrap();
    let z = g.tape.value(f.logits);
    assert!(z.data().iter().all(|&v| v == 0.0));
    assert_eq!(predict(z), vec![0]);
}

#[test]
fn link_forward_matches_shapes_and_is_seeded() {
    let cfg = small_config();
    let model = Model::init(cfg, 8).unwrap();
    let frames = random_frames(&cfg, 0.3, 2);
    let params = spikelink::channel::LinkConfig::default()
        .to_params()
        .unwrap();
    let run = |receive, seed| {
        let mut g = Graph::new(&model.store, PassOptions::eval(0));
        let ch = ChannelUse::Link {
            params,
            receive,
            seed,
        };
        let f = model.forward(&mut g, &[&frames, &frames], &ch).unwrap();
        assert_eq!(f.received.len(), cfg.encoder.slots());
        f.received
            .iter()
            .flat_map(|&r| g.tape.value(r).data().to_vec())
            .collect::<Vec<f64>>()
    };
    let a = run(ReceiveMode::Soft, 1);
    assert_eq!(a, run(ReceiveMode::Soft, 1));
    assert_ne!(a, run(ReceiveMode::Soft, 2));
    let hard = run(ReceiveMode::Hard, 1);
    assert!(hard.iter().all(|&v| v == 0.0 || v == 1.0));
}

#[test]
fn training_pass_updates_running_stats() {
    let cfg = small_config();
    let mut model = Model::init(cfg, 8).unwrap();
    let frames = random_frames(&cfg, 0.3, 2);
    let before = model.store.value(model.weights.patch.bn.mean).clone();
    let updates = {
        let mut g = Graph::new(&model.store, PassOptions::train(0));
        let f = model
            .forward(&mut g, &[&frames, &frames], &ChannelUse::Ideal)
            .unwrap();
        let loss = g.tape.cross_entropy(f.logits, &[0, 1]).unwrap();
        assert!(g.tape.value(loss).item().is_finite());
        let grads = g.tape.backward(loss).unwrap();
        assert!(grads.get(f.logits).is_some());
        g.take_bn_updates()
    };
    assert_eq!(
        updates.len(),
        cfg.encoder.timesteps * (1 + 2 * cfg.encoder.layers)
    );
    model.apply_bn_updates(&updates).unwrap();
    assert_ne!(model.store.value(model.weights.patch.bn.mean), &before);
}

#[test]
fn running_statistics_are_kept_per_step() {
    let cfg = small_config();
    let mut model = Model::init(cfg, 3).unwrap();
    let w = model.weights.patch.bn;
    let d = cfg.encoder.dim;
    let x = Tensor::new(
        &[6, d],
        (0..6 * d).map(|k| ((k * 37) % 11) as f64 * 0.3).collect(),
    )
    .unwrap();
    let untouched = model.store.value(w.mean).data()[..d].to_vec();
    let mut train_out = Vec::new();
    for _ in 0..300 {
        let mut g = Graph::new(&model.store, PassOptions::train(0));
        let xv = g.tape.input(x.clone());
        let o = g.bn(xv, &w, 1).unwrap();
        train_out = g.tape.value(o).data().to_vec();
        let updates = g.take_bn_updates();
        model.apply_bn_updates(&updates).unwrap();
    }
    assert_eq!(&model.store.value(w.mean).data()[..d], &untouched[..]);
    let mut g = Graph::new(&model.store, PassOptions::eval(0));
    let xv = g.tape.input(x);
    let o = g.bn(xv, &w, 1).unwrap();
    for (a, b) in g.tape.value(o).data().iter().zip(&train_out) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
}
