//! Independent checks shared by the unit suites and the acceptance run.

use std::collections::BTreeSet;

use goalworld::agents::TopicHead;
use goalworld::neural::*;
use goalworld::rl::{a2c_loss_and_grad, A2CConfig, A2CSample, PolicyHead};
use goalworld::world::{check_action, EntityId, GameAction, WorldGraph};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bandit::Bandit;
use super::{fd_grad, max_rel_err};

/// Every syntactic action over all ids, filtered through `check_action`.
pub fn brute_force_admissible(w: &WorldGraph, actor: EntityId) -> BTreeSet<GameAction> {
    GameAction::all_syntactic(&w.ids())
        .into_iter()
        .filter(|a| check_action(w, actor, a).unwrap().is_ok())
        .collect()
}

pub fn random_bag(rng: &mut ChaCha8Rng, hash_dim: usize) -> FeatureBag {
    let n = rng.gen_range(1..6);
    let words: Vec<String> = (0..n).map(|_| format!("w{}", rng.gen_range(0..20))).collect();
    featurize(&words, hash_dim)
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// In-batch softmax loss of a small random bi-encoder.
pub fn biencoder_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = EncoderConfig { hash_dim: 32, dim: 8, init_scale: 0.5 };
    let model: BiEncoder<f64> = BiEncoder::new(&cfg, &mut rng);
    let rows = rng.gen_range(2..6);
    let batch: Vec<_> = (0..rows).map(|_| (random_bag(&mut rng, 32), random_bag(&mut rng, 32))).collect();
    let (_, grad) = model.loss_and_grad(&batch).unwrap();
    let mut analytic = grad.context.to_flat(32);
    analytic.extend(grad.candidate.to_flat(32));
    let n_ctx = model.context.flat_params().len();
    let numeric = fd_grad(
        |p| {
            let mut m = model.clone();
            m.context.set_flat_params(&p[..n_ctx]).unwrap();
            m.candidate.set_flat_params(&p[n_ctx..]).unwrap();
            m.loss_and_grad(&batch).unwrap().0
        },
        &model.flat_params(),
        1e-5,
    );
    max_rel_err(&analytic, &numeric, 1e-5)
}

/// Gradient of `r · mlp(s)` for a random projection `r`.
pub fn mlp_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n_in, hidden, out) = (rng.gen_range(2..9), rng.gen_range(2..17), rng.gen_range(2..7));
    let mlp: MlpPolicy<f64> = MlpPolicy::uniform(n_in, hidden, out, 0.5, &mut rng);
    let s = uniform_vec(&mut rng, n_in);
    let r = uniform_vec(&mut rng, out);
    let cache = mlp.forward_cached(&s).unwrap();
    let mut g = mlp.zero_grad();
    mlp.backward(&s, &cache, &r, &mut g);
    let numeric = fd_grad(
        |p| {
            let mut m = mlp.clone();
            m.set_flat_params(p).unwrap();
            m.forward(&s).unwrap().iter().zip(&r).map(|(o, r)| o * r).sum()
        },
        &mlp.flat_params(),
        1e-5,
    );
    max_rel_err(&g.to_flat(), &numeric, 1e-5)
}

/// Squared error of a random linear value head.
pub fn value_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..10);
    let head = ValueHead { w: uniform_vec(&mut rng, n), b: rng.gen_range(-1.0..1.0) };
    let s = uniform_vec(&mut rng, n);
    let target: f64 = rng.gen_range(-1.0..1.0);
    let (gw, gb) = head.grad(&s, 2.0 * (head.forward(&s) - target));
    let mut analytic = gw;
    analytic.push(gb);
    let numeric = fd_grad(
        |p| {
            let h = ValueHead { w: p[..n].to_vec(), b: p[n] };
            (h.forward(&s) - target).powi(2)
        },
        &head.flat_params(),
        1e-5,
    );
    max_rel_err(&analytic, &numeric, 1e-5)
}

/// Full actor-critic loss (policy, value and entropy terms) of a random
/// topic head on random samples.
pub fn a2c_fd_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topics = rng.gen_range(2..7);
    let b = Bandit::new(topics, &mut rng);
    let mut head = b.head.clone();
    head.policy = MlpPolicy::uniform(topics, 16, topics, 0.7, &mut rng);
    head.value = ValueHead { w: uniform_vec(&mut rng, topics), b: rng.gen_range(-0.5..0.5) };
    let cfg = A2CConfig { entropy_coef: rng.gen_range(0.0..0.2), value_coef: rng.gen_range(0.1..1.0), ..A2CConfig::default() };
    let samples: Vec<A2CSample<Vec<f64>>> = (0..rng.gen_range(1..8))
        .map(|_| A2CSample {
            input: b.one_hot(rng.gen_range(0..topics)),
            action: rng.gen_range(0..topics),
            ret: rng.gen_range(0.0..1.0),
            advantage: rng.gen_range(-1.0..1.0),
        })
        .collect();
    let (_, grad) = a2c_loss_and_grad(&head, &samples, &cfg).unwrap();
    let numeric = fd_grad(
        |p| {
            let mut h = head.clone();
            h.set_params(p);
            a2c_loss_and_grad(&h, &samples, &cfg).unwrap().0.total
        },
        &head.params(),
        1e-6,
    );
    max_rel_err(&TopicHead::grad_flat(&grad), &numeric, 1e-3)
}

/// Fifty contexts, each paired with its own reply.
pub fn toy_corpus(hash_dim: usize) -> Vec<(FeatureBag, FeatureBag)> {
    (0..50)
        .map(|i| {
            let c = [String::from("_partner_say_"), format!("question{i}"), "please".into()];
            let v = [format!("answer{i}"), "ok".into()];
            (featurize(&c, hash_dim), featurize(&v, hash_dim))
        })
        .collect()
}

/// Trains on the toy corpus until recall@1 reaches 0.95 or 200 epochs
/// pass. Returns the final recall and the epochs used.
pub fn train_toy_biencoder(seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cfg = EncoderConfig { hash_dim: 4096, dim: 32, init_scale: 1.0 };
    let mut model: BiEncoder<f64> = BiEncoder::new(&cfg, &mut rng);
    let data = toy_corpus(cfg.hash_dim);
    let sgd = Sgd { learning_rate: 0.5, clip_norm: 1.0 };
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut epochs = 0;
    while epochs < 200 && model.recall_at_1(&data) < 0.95 {
        order.shuffle(&mut rng);
        for chunk in order.chunks(10) {
            let batch: Vec<_> = chunk.iter().map(|&i| data[i].clone()).collect();
            model.train_batch(&batch, &sgd).unwrap();
        }
        epochs += 1;
    }
    (model.recall_at_1(&data), epochs)
}

/// Three tight, well separated 2-d blobs of 30 points each, with their
/// true labels.
pub fn planted_blobs(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<usize>) {
    let centres = [[0.0, 0.0], [10.0, 0.0], [5.0, 9.0]];
    let mut pts = Vec::new();
    let mut labels = Vec::new();
    for (k, c) in centres.iter().enumerate() {
        for _ in 0..30 {
            pts.push(vec![c[0] + rng.gen_range(-1.0..1.0), c[1] + rng.gen_range(-1.0..1.0)]);
            labels.push(k);
        }
    }
    (pts, labels)
}

/// True when the two labelings induce the same partition.
pub fn same_partition(a: &[usize], b: &[usize]) -> bool {
    a.len() == b.len()
        && (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
}
