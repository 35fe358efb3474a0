use core::fmt;

/// The six navigation actions. Indices are fixed and shared by distributions,
/// file formats and network heads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[repr(u8)]
pub enum Action {
    Stop = 0,
    MoveForward = 1,
    TurnLeft = 2,
    TurnRight = 3,
    LookUp = 4,
    LookDown = 5,
}

impl Action {
    pub const COUNT: usize = 6;
    pub const ALL: [Action; 6] = [
        Action::Stop,
        Action::MoveForward,
        Action::TurnLeft,
        Action::TurnRight,
        Action::LookUp,
        Action::LookDown,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// Phrase used in the action-probability sentence.
    pub fn phrase(self) -> &'static str {
        match self {
            Action::Stop => "Stop",
            Action::MoveForward => "move forward",
            Action::TurnLeft => "turn left",
            Action::TurnRight => "turn right",
            Action::LookUp => "look up",
            Action::LookDown => "look down",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.phrase())
    }
}

/// Object categories an episode can ask for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
#[repr(u8)]
pub enum GoalCategory {
    Chair = 0,
    Bed = 1,
    Plant = 2,
    Toilet = 3,
    TvMonitor = 4,
    Sofa = 5,
}

impl GoalCategory {
    pub const COUNT: usize = 6;
    pub const ALL: [GoalCategory; 6] = [
        GoalCategory::Chair,
        GoalCategory::Bed,
        GoalCategory::Plant,
        GoalCategory::Toilet,
        GoalCategory::TvMonitor,
        GoalCategory::Sofa,
    ];

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<GoalCategory> {
        GoalCategory::ALL.get(i).copied()
    }

    pub fn label(self) -> &'static str {
        match self {
            GoalCategory::Chair => "chair",
            GoalCategory::Bed => "bed",
            GoalCategory::Plant => "plant",
            GoalCategory::Toilet => "toilet",
            GoalCategory::TvMonitor => "tv_monitor",
            GoalCategory::Sofa => "sofa",
        }
    }

    pub fn from_label(label: &str) -> Option<GoalCategory> {
        GoalCategory::ALL.iter().copied().find(|g| g.label() == label)
    }
}

impl fmt::Display for GoalCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("probability for {action} is {value}, expected a finite non-negative value")]
    Negative { action: Action, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("no probability mass to normalize")]
    ZeroMass,
}

/// Sum tolerance for a valid distribution.
pub const SUM_TOLERANCE: f64 = 1e-9;

/// Probabilities over the six actions, indexed by [`Action::index`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ActionDistribution([f64; 6]);

impl ActionDistribution {
    pub fn new(p: [f64; 6]) -> Result<Self, DistributionError> {
        let mut sum = 0.0;
        for (i, &v) in p.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DistributionError::Negative {
                    action: Action::ALL[i],
                    value: v,
                });
            }
            sum += v;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(DistributionError::NotNormalized { sum });
        }
        Ok(Self(p))
    }

    /// Divides non-negative weights by their sum.
    pub fn normalized(weights: [f64; 6]) -> Result<Self, DistributionError> {
        let mut sum = 0.0;
        for (i, &v) in weights.iter().enumerate() {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(DistributionError::Negative {
                    action: Action::ALL[i],
                    value: v,
                });
            }
            sum += v;
        }
        if sum <= 0.0 {
            return Err(DistributionError::ZeroMass);
        }
        let mut p = weights;
        for v in &mut p {
            *v /= sum;
        }
        Ok(Self(p))
    }

    /// Wraps a softmax output without re-checking it.
    pub(crate) fn from_softmax(p: [f64; 6]) -> Self {
        debug_assert!((p.iter().sum::<f64>() - 1.0).abs() <= SUM_TOLERANCE);
        Self(p)
    }

    pub fn uniform() -> Self {
        Self([1.0 / 6.0; 6])
    }

    pub fn onehot(action: Action) -> Self {
        let mut p = [0.0; 6];
        p[action.index()] = 1.0;
        Self(p)
    }

    #[inline]
    pub fn probs(&self) -> &[f64; 6] {
        &self.0
    }

    #[inline]
    pub fn prob(&self, action: Action) -> f64 {
        self.0[action.index()]
    }

    /// Highest-probability action; ties go to the lowest index.
    pub fn argmax(&self) -> Action {
        let mut best = 0;
        for i in 1..6 {
            if self.0[i] > self.0[best] {
                best = i;
            }
        }
        Action::ALL[best]
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        self.0
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * crate::math::ln(p))
            .sum()
    }
}

/// A set of actions, stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ActionSet(u8);

impl ActionSet {
    pub const EMPTY: ActionSet = ActionSet(0);

    pub fn from_actions(actions: &[Action]) -> Self {
        let mut s = Self::EMPTY;
        for &a in actions {
            s.insert(a);
        }
        s
    }

    pub fn insert(&mut self, action: Action) {
        self.0 |= 1 << action.index();
    }

    pub fn contains(&self, action: Action) -> bool {
        self.0 & (1 << action.index()) != 0
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(&self) -> impl Iterator<Item = Action> + '_ {
        Action::ALL.into_iter().filter(|a| self.contains(*a))
    }

    pub fn bits(&self) -> u8 {
        self.0
    }

    pub fn from_bits(bits: u8) -> Self {
        Self(bits & 0b11_1111)
    }
}
