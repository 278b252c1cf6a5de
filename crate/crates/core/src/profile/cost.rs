use std::fmt;

use super::{CoordinateSpace, GeneralizedValue, ProfileError, Result, Scalar, UserProfile};

/// One processing stage: fixed duration plus a profile-dependent overhead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stage {
    pub duration: i64,
    pub overhead: GeneralizedValue,
}

/// Request-processing model. `r` and `z` are the request and response shapes; only the
/// stages contribute to cost. Units are dimensionless.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostModel {
    pub name: String,
    pub request: GeneralizedValue,
    pub response: GeneralizedValue,
    pub stages: Vec<Stage>,
}

impl CostModel {
    pub fn new(name: &str, request: GeneralizedValue, response: GeneralizedValue, stages: Vec<Stage>) -> Result<Self> {
        if stages.is_empty() {
            return Err(ProfileError::BadCostModel("at least one stage is required".into()));
        }
        if let Some(i) = stages.iter().position(|s| s.duration < 0) {
            return Err(ProfileError::BadCostModel(format!("stage {} has a negative duration", i + 1)));
        }
        Ok(CostModel { name: name.into(), request, response, stages })
    }
}

impl CoordinateSpace {
    /// `sum(l_i + q_i)` with every `q_i` resolved against `profile`.
    pub fn estimate_request_cost(&self, model: &CostModel, profile: &UserProfile) -> Result<i64> {
        let mut total = 0i64;
        for (i, stage) in model.stages.iter().enumerate() {
            let q = self.apply_all(&stage.overhead, profile.values.iter().map(|(c, v)| (c.as_str(), v.as_str())))?;
            match q.as_scalar() {
                Some(Scalar::Int(n)) => total += stage.duration + n,
                Some(Scalar::Text(_)) => return Err(ProfileError::NonNumericCost(i + 1)),
                None => return Err(ProfileError::UnresolvedCost { stage: i + 1, free: q.free().to_vec() }),
            }
        }
        Ok(total)
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cost model {} {{ r {}; z {};", self.name, self.request, self.response)?;
        for s in &self.stages {
            write!(f, " stage {} q {};", s.duration, s.overhead)?;
        }
        f.write_str(" }")
    }
}

#[cfg(test)]
mod tests {
    use super::super::Coordinate;
    use super::*;

    fn space() -> CoordinateSpace {
        let mut s = CoordinateSpace::new();
        s.declare(Coordinate::new("s", &["higraph", "mmedia"])).unwrap();
        s
    }

    #[test]
    fn cost_sums_durations_and_resolved_overheads() {
        let sp = space();
        let q1 = sp
            .generalized(
                vec!["s".into()],
                [(vec!["higraph".into()], Scalar::Int(5)), (vec!["mmedia".into()], Scalar::Int(20))],
            )
            .unwrap();
        let m = CostModel::new(
            "m",
            GeneralizedValue::scalar(0),
            GeneralizedValue::scalar(0),
            vec![Stage { duration: 10, overhead: q1 }, Stage { duration: 3, overhead: GeneralizedValue::scalar(1) }],
        )
        .unwrap();
        let hi = UserProfile::new("a").with("s", "higraph");
        let mm = UserProfile::new("b").with("s", "mmedia");
        assert_eq!(sp.estimate_request_cost(&m, &hi).unwrap(), 10 + 5 + 3 + 1);
        assert_eq!(sp.estimate_request_cost(&m, &mm).unwrap(), 10 + 20 + 3 + 1);
        let none = UserProfile::new("c");
        assert!(matches!(sp.estimate_request_cost(&m, &none), Err(ProfileError::UnresolvedCost { stage: 1, .. })));
    }

    #[test]
    fn model_needs_a_stage() {
        let r = CostModel::new("m", GeneralizedValue::scalar(0), GeneralizedValue::scalar(0), vec![]);
        assert!(matches!(r, Err(ProfileError::BadCostModel(_))));
    }
}
