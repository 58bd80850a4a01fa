#![allow(dead_code)]

/// Central finite differences of `f` at `x`.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest per-coordinate relative error, with `floor` guarding tiny entries.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Softmax via `p_i = 1 / Σ_j exp(s_j - s_i)`, no shared code with the library.
pub fn softmax_oracle(s: &[f64]) -> Vec<f64> {
    s.iter()
        .map(|&si| 1.0 / s.iter().map(|&sj| (sj - si).exp()).sum::<f64>())
        .collect()
}

use goalworld::task::{CharacterRef, Scenario};
use goalworld::world::{ContainmentMode, ContainmentState, PropertyFlag, WorldGraph};

/// Kitchen with a guard (player), a knight (env), a lantern, hay, a hat and a table.
pub fn kitchen() -> Scenario {
    let mut w = WorldGraph::new();
    let room = w.add_location("kitchen", "a warm kitchen");
    let guard = w.add_character("guard", "i guard the gate", room);
    let knight = w.add_character("knight", "i serve the queen", room);
    let floor = ContainmentState::new(room, ContainmentMode::InRoom);
    w.add_object("lantern", "", [PropertyFlag::Gettable], floor);
    w.add_object("hay", "", [PropertyFlag::Gettable], floor);
    w.add_object("hat", "", [PropertyFlag::Gettable, PropertyFlag::Wearable], floor);
    w.add_object("table", "", [PropertyFlag::Surface], floor);
    Scenario {
        setting_name: "kitchen".into(),
        setting_desc: "a warm kitchen".into(),
        player: CharacterRef { id: guard, name: "guard".into(), persona: "i guard the gate".into() },
        env_char: CharacterRef { id: knight, name: "knight".into(), persona: "i serve the queen".into() },
        world: w,
    }
}

pub fn object(s: &Scenario, name: &str) -> goalworld::world::EntityId {
    s.world.entities().find(|e| e.name == name).expect("fixture object").id
}

use std::sync::OnceLock;

use goalworld::agents::{build_inverse_dataset, InverseExample, InverseModel, TrainConfig};
use goalworld::neural::EncoderConfig;
use goalworld::rng::stream;
use goalworld::task::{generate_synthetic_corpus, Corpus, GenConfig, Split};

pub fn tiny_gen() -> GenConfig {
    GenConfig { worlds: 4, unseen_worlds: 1, episodes_per_world: 30, valid_per_world: 2, test_per_world: 8, ..GenConfig::default() }
}

pub fn tiny_encoder() -> EncoderConfig {
    EncoderConfig { hash_dim: 1 << 12, dim: 16, init_scale: 1.0 }
}

/// Four-world corpus, its inverse dataset and a goal-conditioned inverse
/// model, built once per test binary.
pub struct Tiny {
    pub corpus: Corpus,
    pub data: Vec<InverseExample>,
    pub inverse: InverseModel,
}

pub fn tiny() -> &'static Tiny {
    static CELL: OnceLock<Tiny> = OnceLock::new();
    CELL.get_or_init(|| {
        let corpus = generate_synthetic_corpus(&tiny_gen(), 21).unwrap();
        let data = build_inverse_dataset(&corpus.split(Split::Train)).unwrap();
        let cfg = TrainConfig { epochs: 3, ..TrainConfig::default() };
        let (inverse, _) =
            InverseModel::train(&data, corpus.player_utterances.clone(), true, &tiny_encoder(), &cfg, &mut stream(21, &[1]))
                .unwrap();
        Tiny { corpus, data, inverse }
    })
}

pub mod bandit;
pub mod oracles;
pub mod metrics;
