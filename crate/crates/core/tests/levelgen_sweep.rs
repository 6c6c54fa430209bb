mod support;

use std::collections::HashMap;

use limbarena_core::arena::{ArenaSpec, ScriptSpec};
use limbarena_core::levelgen::{generate, GenParams, Schedules, TaskId};
use proptest::prelude::*;

#[test]
fn quick_sweep() {
    let mut failures = Vec::new();
    let mut unsolved = Vec::new();
    for task in TaskId::ALL {
        for d in 0..=10u8 {
            for seed in 0..20u64 {
                match generate(&GenParams::new(task, d, seed)) {
                    Ok(l) => {
                        if !support::walker::solvable(&l.arena) {
                            unsolved.push((task, d, seed));
                        }
                    }
                    Err(e) => failures.push(e.to_string()),
                }
            }
        }
    }
    assert!(failures.is_empty(), "{failures:?}");
    assert!(unsolved.is_empty(), "{} unsolved: {:?}", unsolved.len(), &unsolved[..unsolved.len().min(30)]);
}

#[test]
fn hardness_never_decreases_with_difficulty() {
    let s = Schedules::default();
    for task in TaskId::ALL {
        for d in 0..10u8 {
            assert!(s.hardness(task, d + 1) >= s.hardness(task, d), "{task} at {d}");
        }
        assert!(s.hardness(task, 10) > s.hardness(task, 0), "{task} is flat");
    }
}

#[test]
fn sector_food_counts_have_a_unique_maximum() {
    for seed in 0..1000 {
        let level = generate(&GenParams::new(TaskId::L9, 10, seed)).unwrap();
        let mut counts: Vec<usize> = level
            .arena
            .scripts
            .iter()
            .filter_map(|s| match s {
                ScriptSpec::CloseGateOnEntry { foods, .. } => Some(foods.len()),
                _ => None,
            })
            .collect();
        assert!(counts.len() >= 2, "seed {seed}");
        counts.sort_unstable();
        let top = counts[counts.len() - 1];
        assert!(counts[counts.len() - 2] < top, "seed {seed}: {counts:?}");
    }
}

fn without_colors(mut a: ArenaSpec) -> ArenaSpec {
    a.blocks.iter_mut().for_each(|b| b.color = [0.0; 3]);
    a.foods.iter_mut().for_each(|f| f.color = [0.0; 3]);
    a.bound_color = [0.0; 3];
    a
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recolor_keeps_geometry_and_class_colors(d in 0u8..=10, seed in 0u64..100_000) {
        let six = generate(&GenParams::new(TaskId::L6, d, seed)).unwrap();
        let base = generate(&GenParams::new(six.base_task, d, seed)).unwrap();
        prop_assert_eq!(without_colors(six.arena.clone()), without_colors(base.arena));
        let mut seen: HashMap<String, [f64; 3]> = HashMap::new();
        let mut check = |class: String, color: [f64; 3]| {
            let c = *seen.entry(class).or_insert(color);
            c == color
        };
        for b in &six.arena.blocks {
            let class = format!("{:?}/{}", b.kind, b.transparent);
            prop_assert!(check(class, b.color));
        }
        for f in &six.arena.foods {
            let class = format!("{:?}", f.kind);
            prop_assert!(check(class, f.color));
        }
    }
}
