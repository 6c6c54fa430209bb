use std::io::{BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::{Arc, Mutex};

use limbarena_core::agent::ActionVector;
use limbarena_core::curriculum::{Cell, CurriculumState};
use limbarena_core::env::Env;
use limbarena_core::levelgen::{GenParams, TaskId};
use limbarena_core::rng::Rng;
use limbarena_core::service::{
    evaluate, random_schedule, run_random, serve_tcp, EpisodeTemplate, PolicyKind, RunConfig, SeedTriple,
};
use serde_json::{json, Value};

struct Client {
    w: TcpStream,
    r: BufReader<TcpStream>,
}

impl Client {
    fn connect(port: u16) -> Self {
        let s = TcpStream::connect(("127.0.0.1", port)).unwrap();
        Self {
            w: s.try_clone().unwrap(),
            r: BufReader::new(s),
        }
    }

    fn call(&mut self, msg: Value) -> Value {
        writeln!(self.w, "{msg}").unwrap();
        let mut line = String::new();
        self.r.read_line(&mut line).unwrap();
        serde_json::from_str(&line).unwrap()
    }
}

fn spawn_server(connections: usize, curriculum: Option<Arc<Mutex<CurriculumState>>>) -> (u16, std::thread::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = listener.local_addr().unwrap().port();
    let h = std::thread::spawn(move || {
        serve_tcp(listener, EpisodeTemplate::default(), curriculum, Some(connections)).unwrap();
    });
    (port, h)
}

#[test]
fn remote_episode_matches_in_process_rewards() {
    let (port, server) = spawn_server(1, None);
    let mut c = Client::connect(port);
    let r = c.call(json!({"cmd": "reset", "task": "L5", "difficulty": 3, "seed": 7}));
    assert_eq!(r["ok"], true, "{r}");

    let cfg = EpisodeTemplate::default().config(GenParams::new(TaskId::L5, 3, 7));
    let (mut env, obs) = Env::reset(cfg).unwrap();
    assert_eq!(r["payload"]["observation"], serde_json::to_value(&obs).unwrap());

    let mut rng = Rng::derive(7, "remote-replay");
    for _ in 0..120 {
        let a: Vec<f64> = (0..16).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let remote = c.call(json!({"cmd": "step", "action": a}));
        let local = env.step(&ActionVector::new(&a).unwrap()).unwrap();
        assert_eq!(remote["payload"]["reward"].as_f64(), Some(local.reward));
        assert_eq!(remote["payload"]["info"]["cumulative_reward"].as_f64(), Some(local.info.cumulative_reward));
        assert_eq!(remote["payload"]["done"].as_bool(), Some(local.done));
        if local.done {
            break;
        }
    }
    c.call(json!({"cmd": "close"}));
    server.join().unwrap();
}

#[test]
fn curriculum_is_shared_across_connections() {
    let cells = CurriculumState::grid(&[TaskId::L0], 0, 2);
    let state = Arc::new(Mutex::new(CurriculumState::new(cells, 0.1, 1.0, 3).unwrap()));
    let (port, server) = spawn_server(2, Some(state.clone()));
    let mut a = Client::connect(port);
    let mut b = Client::connect(port);
    let rec = |task, d, reward| json!({"cmd": "record_result", "task": task, "difficulty": d, "reward": reward});
    assert_eq!(a.call(rec("L0", 1, 0.5))["payload"]["count"], 1);
    assert_eq!(b.call(rec("L0", 1, 0.7))["payload"]["count"], 2);
    let err = b.call(rec("L4", 1, 0.7));
    assert_eq!(err["error"]["code"], "unknown-cell");
    let next = a.call(json!({"cmd": "curriculum_next"}));
    assert_eq!(next["payload"]["task"], "L0");
    a.call(json!({"cmd": "close"}));
    b.call(json!({"cmd": "close"}));
    server.join().unwrap();
    assert_eq!(state.lock().unwrap().stats(Cell::new(TaskId::L0, 1)).unwrap().count, 2);
}

#[test]
fn random_schedule_is_uniform_over_cells() {
    let cells = CurriculumState::grid(&TaskId::ALL, 0, 10);
    assert_eq!(cells.len(), 143);
    let draws = 100_000u64;
    let mut counts = vec![0u64; cells.len()];
    let mut rng = Rng::derive(1, "schedule-uniformity");
    for _ in 0..draws {
        let t = random_schedule(&cells, &mut rng);
        let k = cells
            .iter()
            .position(|c| c.task == t.task && c.difficulty == t.difficulty)
            .unwrap();
        counts[k] += 1;
    }
    let p = 1.0 / cells.len() as f64;
    let mean = draws as f64 * p;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for (k, &n) in counts.iter().enumerate() {
        assert!((n as f64 - mean).abs() <= 4.0 * sd, "cell {k}: {n} vs {mean}");
    }
}

#[test]
fn single_enabled_cell_gets_every_episode() {
    let config = RunConfig {
        tasks: vec![TaskId::L7],
        difficulty_min: 4,
        difficulty_max: 4,
        episodes: 12,
        episode: EpisodeTemplate {
            maxsteps: 2,
            ..EpisodeTemplate::default()
        },
        ..RunConfig::default()
    };
    let runs = run_random(&config, None).unwrap();
    assert_eq!(runs.len(), 12);
    assert!(runs.iter().all(|r| r.task == TaskId::L7 && r.difficulty == 4 && r.steps == 2));
}

#[test]
fn evaluation_separates_trivial_policies() {
    let seeds: Vec<SeedTriple> = (0..4)
        .map(|seed| SeedTriple {
            task: TaskId::L0,
            difficulty: 0,
            seed,
        })
        .collect();
    let template = EpisodeTemplate {
        maxsteps: 200,
        ..EpisodeTemplate::default()
    };
    let zero = evaluate(&seeds, PolicyKind::Zero, &template).unwrap();
    assert_eq!(zero.rows.len(), 1);
    assert_eq!(zero.rows[0].episodes, 4);
    assert_eq!(zero.rows[0].success_rate, 0.0);
    assert!(zero.rows[0].mean_reward < 0.0);
    let teleport = evaluate(&seeds, PolicyKind::Teleport, &template).unwrap();
    assert_eq!(teleport.rows[0].success_rate, 1.0);
    assert!(teleport.rows[0].mean_reward > 0.0);
}
