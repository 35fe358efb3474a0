use super::*;
use crate::backend::{BackendError, ExpertBackend, PolicyBackend};
use crate::gridworld::{Cell, GoalCategory, Observation, SUCCESS_RADIUS_M};
use alloc::vec;

struct Fixed(Action);

impl PolicyBackend for Fixed {
    fn name(&self) -> &str {
        "fixed"
    }
    fn reset(&mut self, _: &Episode, _: &OccupancyGrid) -> Result<(), BackendError> {
        Ok(())
    }
    fn act(&mut self, _: &Observation, _: &Pose) -> Result<ActionDistribution, BackendError> {
        Ok(ActionDistribution::onehot(self.0))
    }
}

struct FailsAt(usize, usize);

impl PolicyBackend for FailsAt {
    fn name(&self) -> &str {
        "fails"
    }
    fn reset(&mut self, _: &Episode, _: &OccupancyGrid) -> Result<(), BackendError> {
        self.1 = 0;
        Ok(())
    }
    fn act(&mut self, _: &Observation, _: &Pose) -> Result<ActionDistribution, BackendError> {
        self.1 += 1;
        if self.1 > self.0 {
            Err(BackendError::Remote("boom".into()))
        } else {
            Ok(ActionDistribution::onehot(Action::TurnLeft))
        }
    }
}

fn room() -> OccupancyGrid {
    let rows = [
        "############",
        "#..........#",
        "#..........#",
        "#..........#",
        "#..........#",
        "############",
    ];
    let mut goals: [Vec<Cell>; 6] = Default::default();
    goals[GoalCategory::Bed.index()] = vec![Cell::new(10, 2)];
    OccupancyGrid::from_rows(&rows, goals).unwrap()
}

fn episode(heading: i32) -> Episode {
    Episode {
        id: "room-0000".into(),
        map_id: "room".into(),
        start: Pose::at_cell(Cell::new(1, 2), heading),
        goal: GoalCategory::Bed,
        d_init_m: 2.25,
    }
}

#[test]
fn softspl_formula() {
    assert_eq!(softspl(5.0, 0.0, 5.0, 5.0, true), Ok(1.0));
    assert_eq!(softspl(4.0, 2.0, 4.0, 8.0, true), Ok(0.25));
    assert_eq!(softspl(4.0, 6.0, 4.0, 2.0, true), Ok(0.0));
    assert_eq!(softspl(4.0, 6.0, 4.0, 2.0, false), Ok(-0.5));
    assert_eq!(softspl(0.0, 1.0, 4.0, 2.0, true), Err(MetricError::InitialDistance(0.0)));
}

#[test]
fn expert_reaches_goal_without_collisions() {
    let g = room();
    let r = run_episode(&mut ExpertBackend::new(), &g, &episode(0), &EvalConfig::default(), 0);
    assert!(r.success, "{r:?}");
    assert_eq!(r.collision_count, 0);
    assert!(r.d_t_m <= SUCCESS_RADIUS_M);
    // straight corridor: the path is exactly the distance to the region
    assert!((r.softspl - 1.0).abs() < 1e-12, "{r:?}");
}

#[test]
fn immediate_stop_far_away() {
    let g = room();
    let r = run_episode(&mut Fixed(Action::Stop), &g, &episode(0), &EvalConfig::default(), 0);
    assert!(!r.success);
    assert_eq!((r.steps, r.softspl, r.path_length_m), (1, 0.0, 0.0));
    assert_eq!(r.d_t_m, 2.25);
}

#[test]
fn walking_into_a_wall() {
    let g = room();
    // heading 180 faces the west wall from x = 1
    let (r, t) = run_episode_traced(&mut Fixed(Action::MoveForward), &g, &episode(180), &EvalConfig::default(), 0);
    assert_eq!((r.steps, r.collision_count), (500, 500));
    assert!(!r.success);
    assert_eq!(r.path_length_m, 0.0);
    assert!(t.poses.iter().all(|p| *p == episode(180).start));
}

#[test]
fn backend_errors_become_rows() {
    let g = room();
    let r = run_episode(&mut FailsAt(3, 0), &g, &episode(0), &EvalConfig::default(), 0);
    assert_eq!(r.steps, 3);
    assert!(!r.success);
    assert_eq!(r.error.as_deref(), Some("remote policy failed: boom"));
}

#[test]
fn path_length_counts_clear_forward_moves() {
    let g = room();
    let cfg = EvalConfig {
        selection: Selection::Sample,
        max_steps: 200,
        ..EvalConfig::default()
    };
    let mut b = crate::backend::RandomBackend::new(3);
    for seed in 0..20 {
        let (r, t) = run_episode_traced(&mut b, &g, &episode(0), &cfg, seed);
        let moves = t
            .actions
            .iter()
            .zip(&t.collided)
            .filter(|(a, c)| **a == Action::MoveForward && !**c)
            .count();
        assert_eq!(r.path_length_m, 0.25 * moves as f64);
        assert!(r.collision_count <= r.steps);
        if r.success {
            assert_eq!(t.actions.last(), Some(&Action::Stop));
        }
    }
}

#[test]
fn sampling_follows_the_distribution() {
    let mut r = rng::seeded(1);
    let d = ActionDistribution::new([0.5, 0.0, 0.25, 0.25, 0.0, 0.0]).unwrap();
    let mut counts = [0usize; 6];
    for _ in 0..20_000 {
        counts[select(&d, Selection::Sample, &mut r).index()] += 1;
    }
    assert_eq!(counts[1] + counts[4] + counts[5], 0);
    assert!((counts[0] as f64 / 20_000.0 - 0.5).abs() < 0.02);
    assert_eq!(select(&ActionDistribution::uniform(), Selection::Argmax, &mut r), Action::Stop);
}

#[test]
fn report_aggregates_and_order() {
    let g = room();
    let e1 = episode(0);
    let mut e2 = episode(90);
    e2.id = "room-0001".into();
    let eps = [(&e2, &g), (&e1, &g)];
    let report = evaluate(|_| ExpertBackend::new(), &eps, &[2, 1], &EvalConfig::default());
    let ids: Vec<(&str, u64)> = report.per_episode.iter().map(|r| (r.episode_id.as_str(), r.seed)).collect();
    assert_eq!(ids, vec![("room-0000", 1), ("room-0000", 2), ("room-0001", 1), ("room-0001", 2)]);
    assert_eq!(report.aggregates, aggregate(&report.per_episode));
    assert_eq!(report.per_seed.len(), 2);
    assert_eq!(report.aggregates.success_mean, 1.0);
    assert_eq!(report.config.backend, "expert");
}

#[test]
fn svg_rendering() {
    let g = room();
    let ep = episode(0);
    let empty = render_trajectory_svg(&g, &ep, &Trajectory::default());
    assert!(empty.contains("class=\"start\""));
    assert!(!empty.contains("polyline"));
    let (_, t) = run_episode_traced(&mut ExpertBackend::new(), &g, &ep, &EvalConfig::default(), 0);
    let a = render_trajectory_svg(&g, &ep, &t);
    assert_eq!(a, render_trajectory_svg(&g, &ep, &t));
    assert!(a.contains("polyline"));
}
