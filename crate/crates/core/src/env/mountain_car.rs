use crate::mdp::ActionId;
use crate::rng::SeededRng;

pub const POSITION_BOUNDS: (f64, f64) = (-1.2, 0.6);
pub const VELOCITY_BOUNDS: (f64, f64) = (-0.07, 0.07);

const FORCE: f64 = 0.001;
const GRAVITY: f64 = 0.0025;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousState {
    pub position: f64,
    pub velocity: f64,
}

impl ContinuousState {
    pub fn new(position: f64, velocity: f64) -> Self {
        Self { position, velocity }
    }

    pub fn as_array(&self) -> [f64; 2] {
        [self.position, self.velocity]
    }
}

/// Sparse-reward mountain car: reward 1 on reaching the goal, 0 otherwise.
///
/// The environment holds only constants; the car state lives with the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MountainCarEnv {
    pub step_cap: usize,
    pub goal_position: f64,
}

impl Default for MountainCarEnv {
    fn default() -> Self {
        Self {
            step_cap: 1000,
            goal_position: 0.5,
        }
    }
}

impl MountainCarEnv {
    pub const NUM_ACTIONS: usize = 3;

    pub fn reset(&self, rng: &mut SeededRng) -> ContinuousState {
        ContinuousState::new(rng.uniform_range(-0.6, -0.4), 0.0)
    }

    /// Advances the car by one step taken at time `t` (0-based).
    ///
    /// Returns the next state, reward and whether the episode ended, either at
    /// the goal (reward 1) or because `t + 1` hit the step cap (reward 0).
    pub fn step(&self, s: ContinuousState, a: ActionId, t: usize) -> (ContinuousState, f64, bool) {
        assert!(a.0 < Self::NUM_ACTIONS, "mountain car action {} out of range", a.0);
        assert!(t < self.step_cap, "step {t} at or past the step cap");
        assert!(
            s.position < self.goal_position,
            "step called after the goal was reached"
        );
        let mut velocity = s.velocity + FORCE * (a.0 as f64 - 1.0) - GRAVITY * (3.0 * s.position).cos();
        velocity = velocity.clamp(VELOCITY_BOUNDS.0, VELOCITY_BOUNDS.1);
        let mut position = (s.position + velocity).clamp(POSITION_BOUNDS.0, POSITION_BOUNDS.1);
        if position <= POSITION_BOUNDS.0 && velocity < 0.0 {
            position = POSITION_BOUNDS.0;
            velocity = 0.0;
        }
        let next = ContinuousState::new(position, velocity);
        if position >= self.goal_position {
            (next, 1.0, true)
        } else {
            (next, 0.0, t + 1 >= self.step_cap)
        }
    }
}
