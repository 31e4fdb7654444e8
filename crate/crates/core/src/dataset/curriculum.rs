use super::{DatasetBundle, DatasetError, Role, Trajectory};

/// Leave-one-out training schedule: a fixed test trajectory and a growing
/// prefix of the remaining ones.
#[derive(Debug, Clone)]
pub struct Curriculum {
    pub test: Trajectory,
    /// Remaining trajectories in the order they are added.
    pub remaining: Vec<Trajectory>,
}

impl Curriculum {
    pub fn num_stages(&self) -> usize {
        self.remaining.len()
    }

    /// Training set of stage `index` (0-based): the first `index + 1` remaining trajectories.
    pub fn stage(&self, index: usize) -> &[Trajectory] {
        &self.remaining[..=index]
    }

    pub fn stage_names(&self, index: usize) -> Vec<String> {
        self.stage(index).iter().map(|t| t.name.clone()).collect()
    }
}

/// Holds `test_name` out and orders the rest by `order` when given, else by name.
pub fn make_leave_one_out(
    bundle: &DatasetBundle,
    test_name: &str,
    order: Option<&[String]>,
) -> Result<Curriculum, DatasetError> {
    if bundle.trajectories.len() < 2 {
        return Err(DatasetError::TooFewTrajectories(bundle.trajectories.len()));
    }
    let mut test = bundle
        .trajectory(test_name)
        .cloned()
        .ok_or_else(|| DatasetError::UnknownTrajectory(test_name.to_string()))?;
    test.role = Role::Test;
    let mut remaining: Vec<Trajectory> = match order {
        Some(names) => names
            .iter()
            .filter(|n| n.as_str() != test_name)
            .map(|n| bundle.trajectory(n).cloned().ok_or_else(|| DatasetError::UnknownTrajectory(n.clone())))
            .collect::<Result<_, _>>()?,
        None => {
            let mut rest: Vec<Trajectory> =
                bundle.trajectories.iter().filter(|t| t.name != test_name).cloned().collect();
            rest.sort_by(|a, b| a.name.cmp(&b.name));
            rest
        }
    };
    if remaining.is_empty() {
        return Err(DatasetError::TooFewTrajectories(1));
    }
    for t in &mut remaining {
        t.role = Role::Train;
    }
    Ok(Curriculum { test, remaining })
}
