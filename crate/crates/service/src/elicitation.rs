//! Server side of the three-case preference elicitation.
//!
//! Each agent first splits the total rent over the rooms so that every
//! (room, rent) pair is equally good to them, then states a budget. Whether
//! and how the budget violation index is asked for depends on the answers:
//!
//! 1. every rent is within budget: no question, the smallest menu entry;
//! 2. rents differ and some exceed the budget: a rebate-equivalence question;
//! 3. rents are all equal and all above budget: a self-assessment against
//!    the population.

use std::collections::BTreeMap;

use rentdiv_core::{Economy, Preference, Rational};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    AwaitRents,
    AwaitBudget,
    AwaitRhoEquivalent,
    AwaitRhoSelfAssessment,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    #[serde(rename = "1")]
    WithinBudget,
    #[serde(rename = "2")]
    Uneven,
    #[serde(rename = "3")]
    FlatAboveBudget,
}

/// Classifies indifference rents against a budget. Total over all inputs.
pub fn classify(rents: &[Rational], budget: &Rational) -> Case {
    if rents.iter().all(|r| r <= budget) {
        Case::WithinBudget
    } else if rents.windows(2).any(|w| w[0] != w[1]) {
        Case::Uneven
    } else {
        Case::FlatAboveBudget
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelfAssessment {
    Lower,
    Typical,
    Higher,
}

impl SelfAssessment {
    /// Position in the sorted population, in quarters.
    fn quarters(self) -> usize {
        match self {
            SelfAssessment::Lower => 1,
            SelfAssessment::Typical => 2,
            SelfAssessment::Higher => 3,
        }
    }
}

/// Lower quantile `quarters / 4` of a non-empty sample.
fn quantile(sample: &[Rational], quarters: usize) -> Rational {
    let mut s = sample.to_vec();
    s.sort();
    s[quarters * (s.len() - 1) / 4].clone()
}

/// The rebate probe of case 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RebateProbe {
    /// Smallest budget violation when every rent is above budget, else 0.
    pub x: Rational,
    /// Rebate offered on the most expensive room, `x + 1`.
    pub delta: Rational,
    pub high_room: String,
    pub low_room: String,
    /// How far the most expensive room is above budget.
    pub overage: Rational,
    /// Answers implied by the menu, ascending.
    pub options: Vec<Rational>,
    pub min: Rational,
    pub max: Rational,
}

/// Maps a rebate-equivalence answer to a budget violation index.
///
/// The adopted model is that a rebate of `delta` on a room priced `overage`
/// above budget is worth `delta + rho * min(delta, overage)` in cash, so
/// `rho = (equivalent - delta) / min(delta, overage)`. The raw value is
/// snapped to the nearest menu entry, ties toward the smaller one.
pub fn infer_rho(equivalent: &Rational, delta: &Rational, overage: &Rational, menu: &[Rational]) -> Result<Rational, ApiError> {
    if !delta.is_positive() || !overage.is_positive() {
        return Err(ApiError::invalid_answer("rebate and overage must be positive"));
    }
    if equivalent < delta {
        return Err(ApiError::invalid_answer(format!("an equivalent of {equivalent} is worth less than the rebate of {delta} itself")));
    }
    let raw = (equivalent - delta) / delta.clone().min(overage.clone());
    Ok(snap(&raw, menu))
}

fn snap(raw: &Rational, menu: &[Rational]) -> Rational {
    let mut sorted = menu.to_vec();
    sorted.sort();
    let mut best = sorted[0].clone();
    for m in &sorted[1..] {
        if (m - raw).abs() < (&best - raw).abs() {
            best = m.clone();
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentIntake {
    pub id: String,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rents: Option<BTreeMap<String, Rational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<Case>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_answer: Option<RhoAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RhoAnswer {
    /// Case 1: the index is never used.
    Unused,
    RebateEquivalent { delta: Rational, overage: Rational, equivalent: Rational },
    SelfAssessment { level: SelfAssessment, population: Vec<Rational> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionConfig {
    pub agents: Vec<String>,
    pub rooms: Vec<String>,
    pub total_rent: Rational,
    #[serde(default = "default_menu")]
    pub rho_menu: Vec<Rational>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_bar: Option<Rational>,
    /// Sample the case-3 self-assessment is ranked against. Defaults to the
    /// menu, whose median then answers "typical".
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<Vec<Rational>>,
}

fn default_menu() -> Vec<Rational> {
    vec![Rational::zero(), Rational::new(1, 2), Rational::one(), Rational::from(2)]
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElicitationSession {
    pub id: String,
    pub config: SessionConfig,
    pub rho_bar: Rational,
    pub intake: Vec<AgentIntake>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Prompt {
    /// Split `total_rent` over `rooms` so that every room is equally good.
    Rents { rooms: Vec<String>, total_rent: Rational },
    Budget,
    /// What cash amount is a rebate of `delta` on `high_room` worth?
    RebateEquivalent(RebateProbe),
    /// How strongly, compared to others, going over budget is disliked.
    SelfAssessment { levels: Vec<SelfAssessment> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub agent: String,
    pub stage: Stage,
    pub prompt: Prompt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Answer {
    Rents { rents: BTreeMap<String, Rational> },
    Budget { budget: Rational },
    RebateEquivalent { equivalent: Rational },
    SelfAssessment { level: SelfAssessment },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnswerRequest {
    pub agent: String,
    pub answer: Answer,
}

impl ElicitationSession {
    pub fn new(id: String, config: SessionConfig) -> Result<Self, ApiError> {
        let n = config.agents.len();
        if n == 0 {
            return Err(ApiError::core(rentdiv_core::Error::InvalidEconomy("no agents".into())));
        }
        if config.rooms.len() != n {
            return Err(ApiError::core(rentdiv_core::Error::InvalidEconomy(format!("{} agents but {} rooms", n, config.rooms.len()))));
        }
        let rho_bar = config.rho_bar.clone().or_else(|| config.rho_menu.iter().max().cloned()).unwrap_or_else(Rational::zero);
        if let Some(p) = &config.population {
            if p.is_empty() {
                return Err(ApiError::precondition("population must not be empty"));
            }
        }
        // Ids, menu and rho bar are checked by building a placeholder economy.
        let placeholder = vec![Preference::quasi_linear(vec![Rational::zero(); n]); n];
        let mut menu = config.rho_menu.clone();
        menu.push(Rational::zero());
        Economy::new(config.agents.clone(), config.rooms.clone(), placeholder, config.total_rent.clone(), menu, rho_bar.clone())
            .map_err(ApiError::core)?;
        let intake = config
            .agents
            .iter()
            .map(|id| AgentIntake { id: id.clone(), stage: Stage::AwaitRents, rents: None, budget: None, case: None, rho_answer: None, rho: None })
            .collect();
        Ok(ElicitationSession { id, config, rho_bar, intake })
    }

    pub fn is_done(&self) -> bool {
        self.intake.iter().all(|a| a.stage == Stage::Done)
    }

    fn menu(&self) -> Vec<Rational> {
        let mut m = self.config.rho_menu.clone();
        m.push(Rational::zero());
        m.sort();
        m.dedup();
        m
    }

    fn agent_index(&self, id: &str) -> Result<usize, ApiError> {
        self.intake.iter().position(|a| a.id == id).ok_or_else(|| ApiError::core(rentdiv_core::Error::UnknownAgent(id.to_string())))
    }

    fn ordered_rents(&self, a: &AgentIntake) -> Vec<Rational> {
        let rents = a.rents.as_ref().expect("rents answered");
        self.config.rooms.iter().map(|r| rents[r].clone()).collect()
    }

    /// The case-2 probe for an agent whose rents and budget are known.
    pub fn rebate_probe(&self, i: usize) -> RebateProbe {
        let a = &self.intake[i];
        let budget = a.budget.clone().expect("budget answered");
        let rents = self.ordered_rents(a);
        let rooms = &self.config.rooms;
        let (hi, lo) = {
            let mut hi = 0;
            let mut lo = 0;
            for k in 1..rents.len() {
                if rents[k] > rents[hi] {
                    hi = k;
                }
                if rents[k] < rents[lo] {
                    lo = k;
                }
            }
            (hi, lo)
        };
        let x = if rents.iter().all(|r| *r > budget) { &rents[lo] - &budget } else { Rational::zero() };
        let delta = &x + &Rational::one();
        let overage = &rents[hi] - &budget;
        let reach = delta.clone().min(overage.clone());
        let mut options: Vec<Rational> = self.menu().iter().filter(|r| **r <= self.rho_bar).map(|r| &delta + &(r * &reach)).collect();
        options.dedup();
        let max = &delta + &(&self.rho_bar * &reach);
        RebateProbe { x, min: delta.clone(), max, delta, high_room: rooms[hi].clone(), low_room: rooms[lo].clone(), overage, options }
    }

    pub fn population(&self) -> Vec<Rational> {
        self.config.population.clone().unwrap_or_else(|| self.menu())
    }

    /// The next open question, taking agents in order.
    pub fn next_question(&self) -> Result<Question, ApiError> {
        let (i, a) = self
            .intake
            .iter()
            .enumerate()
            .find(|(_, a)| a.stage != Stage::Done)
            .ok_or_else(|| ApiError::session_done(&self.id))?;
        let prompt = match a.stage {
            Stage::AwaitRents => Prompt::Rents { rooms: self.config.rooms.clone(), total_rent: self.config.total_rent.clone() },
            Stage::AwaitBudget => Prompt::Budget,
            Stage::AwaitRhoEquivalent => Prompt::RebateEquivalent(self.rebate_probe(i)),
            Stage::AwaitRhoSelfAssessment => {
                Prompt::SelfAssessment { levels: vec![SelfAssessment::Lower, SelfAssessment::Typical, SelfAssessment::Higher] }
            }
            Stage::Done => unreachable!(),
        };
        Ok(Question { agent: a.id.clone(), stage: a.stage, prompt })
    }

    /// Applies an answer for `agent`, who must be at the matching stage.
    pub fn answer(&mut self, agent: &str, answer: Answer) -> Result<(), ApiError> {
        let i = self.agent_index(agent)?;
        let stage = self.intake[i].stage;
        match (stage, answer) {
            (Stage::Done, _) => Err(ApiError::wrong_stage(agent, stage)),
            (Stage::AwaitRents, Answer::Rents { rents }) => {
                if rents.len() != self.config.rooms.len() || self.config.rooms.iter().any(|r| !rents.contains_key(r)) {
                    return Err(ApiError::invalid_answer("give exactly one rent per room"));
                }
                let sum = rents.values().fold(Rational::zero(), |s, r| s + r);
                if sum != self.config.total_rent {
                    return Err(ApiError::invalid_answer(format!("rents sum to {sum}, expected {}", self.config.total_rent)));
                }
                let a = &mut self.intake[i];
                a.rents = Some(rents);
                a.stage = Stage::AwaitBudget;
                Ok(())
            }
            (Stage::AwaitBudget, Answer::Budget { budget }) => {
                if budget.is_negative() {
                    return Err(ApiError::invalid_answer("budget must be non-negative"));
                }
                let rents = self.ordered_rents(&self.intake[i]);
                let case = classify(&rents, &budget);
                let min_rho = self.menu()[0].clone();
                let a = &mut self.intake[i];
                a.budget = Some(budget);
                a.case = Some(case);
                match case {
                    Case::WithinBudget => {
                        a.rho_answer = Some(RhoAnswer::Unused);
                        a.rho = Some(min_rho);
                        a.stage = Stage::Done;
                    }
                    Case::Uneven => a.stage = Stage::AwaitRhoEquivalent,
                    Case::FlatAboveBudget => a.stage = Stage::AwaitRhoSelfAssessment,
                }
                Ok(())
            }
            (Stage::AwaitRhoEquivalent, Answer::RebateEquivalent { equivalent }) => {
                let probe = self.rebate_probe(i);
                if equivalent < probe.min || equivalent > probe.max {
                    return Err(ApiError::invalid_answer(format!("answer must lie in [{}, {}]", probe.min, probe.max)));
                }
                let rho = infer_rho(&equivalent, &probe.delta, &probe.overage, &self.menu())?;
                let a = &mut self.intake[i];
                a.rho_answer = Some(RhoAnswer::RebateEquivalent { delta: probe.delta, overage: probe.overage, equivalent });
                a.rho = Some(rho);
                a.stage = Stage::Done;
                Ok(())
            }
            (Stage::AwaitRhoSelfAssessment, Answer::SelfAssessment { level }) => {
                let population = self.population();
                let rho = snap(&quantile(&population, level.quarters()), &self.menu());
                let a = &mut self.intake[i];
                a.rho_answer = Some(RhoAnswer::SelfAssessment { level, population });
                a.rho = Some(rho);
                a.stage = Stage::Done;
                Ok(())
            }
            (stage, _) => Err(ApiError::wrong_stage(agent, stage)),
        }
    }

    /// Recovers values from the indifference rents: `v_a` is the rent plus
    /// the agent's own over-budget penalty on it, so the reported split is
    /// exactly an indifference split of the recovered preference.
    pub fn build_economy(&self) -> Result<Economy, ApiError> {
        if !self.is_done() {
            return Err(ApiError::sessions_incomplete(&self.id));
        }
        let prefs = self
            .intake
            .iter()
            .map(|a| {
                let budget = a.budget.clone().expect("done");
                let rho = a.rho.clone().expect("done");
                let values = self
                    .ordered_rents(a)
                    .into_iter()
                    .map(|r| {
                        let over = (&r - &budget).max(Rational::zero());
                        r + &rho * &over
                    })
                    .collect();
                Preference { values, budget, rho }
            })
            .collect();
        Economy::new(self.config.agents.clone(), self.config.rooms.clone(), prefs, self.config.total_rent.clone(), self.menu(), self.rho_bar.clone())
            .map_err(ApiError::core)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rentdiv_core::rational::{q, qi};
    use rentdiv_core::solver::solve;
    use rentdiv_core::Objective;

    fn two_rooms(m: i64) -> SessionConfig {
        SessionConfig {
            agents: vec!["1".into(), "2".into()],
            rooms: vec!["a".into(), "b".into()],
            total_rent: qi(m),
            rho_menu: default_menu(),
            rho_bar: None,
            population: None,
        }
    }

    fn rents(a: i64, b: i64) -> Answer {
        Answer::Rents { rents: [("a".to_string(), qi(a)), ("b".to_string(), qi(b))].into() }
    }

    #[test]
    fn classification() {
        assert_eq!(classify(&[qi(30), qi(70)], &qi(100)), Case::WithinBudget);
        assert_eq!(classify(&[qi(500), qi(300)], &qi(400)), Case::Uneven);
        assert_eq!(classify(&[qi(400), qi(400)], &qi(300)), Case::FlatAboveBudget);
        assert_eq!(classify(&[qi(400), qi(400)], &qi(400)), Case::WithinBudget);
        assert_eq!(classify(&[qi(7)], &qi(3)), Case::FlatAboveBudget);
    }

    #[test]
    fn case_one_skips_rho() {
        let mut s = ElicitationSession::new("s".into(), two_rooms(100)).unwrap();
        s.answer("1", rents(30, 70)).unwrap();
        s.answer("1", Answer::Budget { budget: qi(100) }).unwrap();
        let a = &s.intake[0];
        assert_eq!((a.stage, a.case, a.rho.clone()), (Stage::Done, Some(Case::WithinBudget), Some(qi(0))));
        assert_eq!(a.rho_answer, Some(RhoAnswer::Unused));
        assert_eq!(s.next_question().unwrap().agent, "2");
    }

    #[test]
    fn case_two_probe() {
        let mut s = ElicitationSession::new("s".into(), two_rooms(800)).unwrap();
        s.answer("1", rents(500, 300)).unwrap();
        s.answer("1", Answer::Budget { budget: qi(400) }).unwrap();
        let question = s.next_question().unwrap();
        assert_eq!(question.stage, Stage::AwaitRhoEquivalent);
        let Prompt::RebateEquivalent(p) = question.prompt else { panic!() };
        // Room b is within budget, so the probe starts from x = 0.
        assert_eq!((p.x.clone(), p.delta.clone(), p.overage.clone()), (qi(0), qi(1), qi(100)));
        assert_eq!((p.high_room.as_str(), p.low_room.as_str()), ("a", "b"));
        assert_eq!(p.options, vec![qi(1), q(3, 2), qi(2), qi(3)]);
        assert_eq!((p.min, p.max), (qi(1), qi(3)));
        assert!(s.answer("1", Answer::RebateEquivalent { equivalent: qi(4) }).is_err());
        s.answer("1", Answer::RebateEquivalent { equivalent: qi(2) }).unwrap();
        assert_eq!(s.intake[0].rho, Some(qi(1)));
    }

    #[test]
    fn case_two_all_above_budget() {
        let mut s = ElicitationSession::new("s".into(), two_rooms(800)).unwrap();
        s.answer("1", rents(500, 300)).unwrap();
        s.answer("1", Answer::Budget { budget: qi(200) }).unwrap();
        let p = s.rebate_probe(0);
        assert_eq!((p.x.clone(), p.delta.clone(), p.overage.clone()), (qi(100), qi(101), qi(300)));
        assert_eq!((p.min, p.max), (qi(101), qi(303)));
    }

    #[test]
    fn case_three_uses_population() {
        let mut s = ElicitationSession::new("s".into(), two_rooms(800)).unwrap();
        s.answer("1", rents(400, 400)).unwrap();
        s.answer("1", Answer::Budget { budget: qi(300) }).unwrap();
        assert_eq!(s.next_question().unwrap().stage, Stage::AwaitRhoSelfAssessment);
        s.answer("1", Answer::SelfAssessment { level: SelfAssessment::Typical }).unwrap();
        // Menu {0, 1/2, 1, 2}: lower median.
        assert_eq!(s.intake[0].rho, Some(q(1, 2)));

        let mut cfg = two_rooms(800);
        cfg.population = Some(vec![qi(2), qi(2), qi(0), qi(1), qi(1)]);
        let mut s = ElicitationSession::new("s".into(), cfg).unwrap();
        s.answer("1", rents(400, 400)).unwrap();
        s.answer("1", Answer::Budget { budget: qi(300) }).unwrap();
        s.answer("1", Answer::SelfAssessment { level: SelfAssessment::Higher }).unwrap();
        assert_eq!(s.intake[0].rho, Some(qi(2)));
    }

    #[test]
    fn rho_inference() {
        let menu = default_menu();
        assert_eq!(infer_rho(&qi(202), &qi(101), &qi(100), &menu).unwrap(), qi(1));
        assert_eq!(infer_rho(&qi(101), &qi(101), &qi(100), &menu).unwrap(), qi(0));
        assert_eq!(infer_rho(&qi(300), &qi(100), &qi(100), &menu).unwrap(), qi(2));
        // 3/4 sits between 1/2 and 1.
        assert_eq!(infer_rho(&q(7, 4), &qi(1), &qi(5), &menu).unwrap(), q(1, 2));
        assert!(infer_rho(&qi(100), &qi(101), &qi(100), &menu).is_err());
        assert!(infer_rho(&qi(1), &qi(0), &qi(100), &menu).is_err());
    }

    #[test]
    fn wrong_inputs() {
        let mut s = ElicitationSession::new("s".into(), two_rooms(800)).unwrap();
        assert!(s.answer("1", rents(500, 200)).is_err());
        assert!(s.answer("1", Answer::Budget { budget: qi(1) }).is_err());
        assert!(s.answer("9", rents(500, 300)).is_err());
        assert!(s.build_economy().is_err());
        assert!(ElicitationSession::new("s".into(), SessionConfig { agents: vec![], rooms: vec![], ..two_rooms(1) }).is_err());
    }

    #[test]
    fn quasi_linear_round_trip() {
        // Indifference splits of v1 = (100, 60) and v2 = (80, 70) at 100.
        let mut s = ElicitationSession::new("s".into(), two_rooms(100)).unwrap();
        for (agent, a, b) in [("1", 70, 30), ("2", 55, 45)] {
            s.answer(agent, rents(a, b)).unwrap();
            s.answer(agent, Answer::Budget { budget: qi(100) }).unwrap();
        }
        assert!(s.is_done());
        assert!(s.next_question().is_err());
        let e = s.build_economy().unwrap();
        assert!(e.is_quasi_linear());
        let sol = solve(&e, &Objective::maxmin_utility()).unwrap();
        assert_eq!(sol.allocation.rents, vec![q(125, 2), q(75, 2)]);
    }

    #[test]
    fn budget_values_recovered_exactly() {
        let mut s = ElicitationSession::new("s".into(), two_rooms(800)).unwrap();
        s.answer("1", rents(500, 300)).unwrap();
        s.answer("1", Answer::Budget { budget: qi(400) }).unwrap();
        s.answer("1", Answer::RebateEquivalent { equivalent: qi(2) }).unwrap();
        s.answer("2", rents(400, 400)).unwrap();
        s.answer("2", Answer::Budget { budget: qi(800) }).unwrap();
        let e = s.build_economy().unwrap();
        let p = e.pref(0);
        assert_eq!(p.values, vec![qi(600), qi(300)]);
        assert_eq!(p.utility(0, &qi(500)), p.utility(1, &qi(300)));
    }
}
