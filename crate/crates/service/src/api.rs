//! Request and response documents shared by the CLI and the HTTP service.

use std::collections::BTreeMap;

use rentdiv_core::doc::{AllocationDocument, EconomyDocument};
use rentdiv_core::incentives::{best_response, OutcomeTable, ReportGrid};
use rentdiv_core::model::{envy_witness, is_maxmin, SelectionCertificate};
use rentdiv_core::oracle::{brute_force_maxmin, distance_to_envy_free, AssignmentOutcome};
use rentdiv_core::solver::{solve, SolveTrace};
use rentdiv_core::{Allocation, Economy, Objective, ObjectiveKind, Rational};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    pub economy: EconomyDocument,
    #[serde(default = "default_kind")]
    pub objective: ObjectiveKind,
    /// `room -> [alpha, beta]` for the rent kinds; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<BTreeMap<String, (Rational, Rational)>>,
    #[serde(default)]
    pub trace: bool,
}

fn default_kind() -> ObjectiveKind {
    ObjectiveKind::MaxminUtility
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentOutcome {
    pub agent: String,
    pub room: String,
    pub rent: Rational,
    pub utility: Rational,
    pub budget: Rational,
    /// `rent - budget` when positive for a budget-sensitive agent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub above_budget_by: Option<Rational>,
}

/// A selection certificate with agent ids in place of indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateDocument {
    pub kind: ObjectiveKind,
    pub holds: bool,
    pub value: Rational,
    pub extreme: Vec<String>,
    pub toward_extreme: bool,
    /// Envy-graph path per agent; `None` where the agent is cut off.
    pub paths: BTreeMap<String, Option<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envy: Option<EnvyDocument>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvyDocument {
    pub agent: String,
    pub envied: String,
    pub gap: Rational,
}

impl CertificateDocument {
    pub fn new(e: &Economy, c: &SelectionCertificate) -> Self {
        let id = |i: usize| e.agents()[i].clone();
        CertificateDocument {
            kind: c.kind,
            holds: c.holds,
            value: c.value.clone(),
            extreme: c.extreme.iter().map(|&i| id(i)).collect(),
            toward_extreme: c.toward_extreme,
            paths: c.paths.iter().enumerate().map(|(i, p)| (id(i), p.as_ref().map(|p| p.iter().map(|&k| id(k)).collect()))).collect(),
            envy: c.envy.as_ref().map(|w| EnvyDocument { agent: id(w.agent), envied: id(w.envied), gap: w.gap.clone() }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SolveResponse {
    pub objective: ObjectiveKind,
    pub allocation: AllocationDocument,
    pub value: Rational,
    pub agents: Vec<AgentOutcome>,
    /// `envy[i][j] = u_i(bundle of j) - u_i(own bundle)`, agents in
    /// economy order; all entries are at most zero.
    pub envy: Vec<Vec<Rational>>,
    pub certificate: CertificateDocument,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<SolveTrace>,
}

fn agent_outcomes(e: &Economy, z: &Allocation) -> Vec<AgentOutcome> {
    (0..e.n())
        .map(|i| {
            let p = e.pref(i);
            let a = z.assignment[i];
            let rent = z.rents[a].clone();
            let over = &rent - &p.budget;
            AgentOutcome {
                agent: e.agents()[i].clone(),
                room: e.rooms()[a].clone(),
                utility: p.utility(a, &rent),
                above_budget_by: (p.is_kinked() && over.is_positive()).then_some(over),
                budget: p.budget.clone(),
                rent,
            }
        })
        .collect()
}

fn envy_matrix(e: &Economy, z: &Allocation) -> Vec<Vec<Rational>> {
    (0..e.n()).map(|i| (0..e.n()).map(|j| z.bundle_utility(e, i, j) - z.bundle_utility(e, i, i)).collect()).collect()
}

pub fn objective_for(e: &Economy, kind: ObjectiveKind, transform: Option<&BTreeMap<String, (Rational, Rational)>>) -> Result<Objective, ApiError> {
    let mut obj = match kind {
        ObjectiveKind::MaxminUtility => Objective::maxmin_utility(),
        ObjectiveKind::MinmaxUtility => Objective::minmax_utility(),
        ObjectiveKind::MaxminTransformedRent => Objective::maxmin_rent(e.n()),
        ObjectiveKind::MinmaxTransformedRent => Objective::minmax_rent(e.n()),
    };
    if let Some(t) = transform {
        if !kind.is_rent_based() {
            return Err(ApiError::precondition("a transform applies only to the rent objectives"));
        }
        if t.len() != e.n() {
            return Err(ApiError::precondition("the transform needs one entry per room"));
        }
        for (room, ab) in t {
            obj.transform[e.room_index(room)?] = ab.clone();
        }
    }
    obj.validate(e)?;
    Ok(obj)
}

/// Solves and certifies. Never returns an allocation whose certificate fails.
pub fn solve_economy(e: &Economy, obj: &Objective, with_trace: bool) -> Result<SolveResponse, ApiError> {
    let sol = solve(e, obj)?;
    if !sol.certificate.holds {
        return Err(ApiError::uncertified(serde_json::to_value(CertificateDocument::new(e, &sol.certificate)).unwrap_or_default()));
    }
    let z = &sol.allocation;
    Ok(SolveResponse {
        objective: obj.kind,
        allocation: AllocationDocument::from_allocation(e, z),
        value: sol.certificate.value.clone(),
        agents: agent_outcomes(e, z),
        envy: envy_matrix(e, z),
        certificate: CertificateDocument::new(e, &sol.certificate),
        trace: with_trace.then_some(sol.trace),
    })
}

pub fn solve_request(req: &SolveRequest) -> Result<SolveResponse, ApiError> {
    let e = req.economy.to_economy()?;
    let obj = objective_for(&e, req.objective, req.transform.as_ref())?;
    solve_economy(&e, &obj, req.trace)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub economy: EconomyDocument,
    pub allocation: AllocationDocument,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyResponse {
    pub total_matches: bool,
    pub envy_free: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub envy: Option<EnvyDocument>,
    pub maxmin: CertificateDocument,
    pub agents: Vec<AgentOutcome>,
    /// Whether the allocation is an envy-free maxmin allocation of the economy.
    pub holds: bool,
}

pub fn verify_allocation(e: &Economy, z: &Allocation) -> Result<VerifyResponse, ApiError> {
    let total_matches = z.total() == *e.total_rent();
    let witness = envy_witness(e, z)?;
    let cert = is_maxmin(e, z)?;
    let envy = witness.map(|w| EnvyDocument { agent: e.agents()[w.agent].clone(), envied: e.agents()[w.envied].clone(), gap: w.gap });
    Ok(VerifyResponse {
        total_matches,
        envy_free: envy.is_none(),
        envy,
        holds: total_matches && cert.holds,
        maxmin: CertificateDocument::new(e, &cert),
        agents: agent_outcomes(e, z),
    })
}

pub fn verify_request(req: &VerifyRequest) -> Result<VerifyResponse, ApiError> {
    let e = req.economy.to_economy()?;
    let z = req.allocation.to_allocation(&e)?;
    verify_allocation(&e, &z)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum OracleRow {
    Infeasible { assignment: BTreeMap<String, String> },
    Optimal { assignment: BTreeMap<String, String>, value: Rational, rents: BTreeMap<String, Rational> },
    Dominated { assignment: BTreeMap<String, String>, bound: Rational },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleResponse {
    pub allocation: AllocationDocument,
    pub value: Rational,
    pub solver_value: Rational,
    pub agrees: bool,
    pub assignments: Vec<OracleRow>,
}

/// Brute-force maxmin over every assignment, compared with the solver.
pub fn oracle_economy(e: &Economy) -> Result<OracleResponse, ApiError> {
    let res = brute_force_maxmin(e)?;
    let solver_value = solve(e, &Objective::maxmin_utility())?.certificate.value;
    let named = |sigma: &[usize]| -> BTreeMap<String, String> {
        sigma.iter().enumerate().map(|(i, &a)| (e.agents()[i].clone(), e.rooms()[a].clone())).collect()
    };
    let assignments = res
        .table
        .iter()
        .map(|row| {
            let assignment = named(&row.assignment);
            match &row.outcome {
                AssignmentOutcome::Infeasible => OracleRow::Infeasible { assignment },
                AssignmentOutcome::Optimal { value, rents } => OracleRow::Optimal {
                    assignment,
                    value: value.clone(),
                    rents: rents.iter().enumerate().map(|(a, r)| (e.rooms()[a].clone(), r.clone())).collect(),
                },
                AssignmentOutcome::Dominated { bound } => OracleRow::Dominated { assignment, bound: bound.clone() },
            }
        })
        .collect();
    Ok(OracleResponse {
        allocation: AllocationDocument::from_allocation(e, &res.optimum),
        agrees: solver_value == res.value,
        value: res.value,
        solver_value,
        assignments,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub values: BTreeMap<String, Rational>,
    pub budget: Rational,
    pub rho: Rational,
}

impl ReportDocument {
    fn new(e: &Economy, p: &rentdiv_core::Preference) -> Self {
        ReportDocument {
            values: e.rooms().iter().cloned().zip(p.values.iter().cloned()).collect(),
            budget: p.budget.clone(),
            rho: p.rho.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManipulationResponse {
    pub agent: String,
    pub grid_step: Rational,
    pub radius: Rational,
    pub reports_searched: usize,
    pub truthful_utility: Rational,
    pub best_utility: Rational,
    pub gain: Rational,
    pub report: ReportDocument,
    pub outcome: AllocationDocument,
}

/// Best response of `agent` over reports within `radius` of the truth on
/// every room, with the true budget and any menu rho; others truthful.
pub fn manipulate(e: &Economy, agent: &str, step: &Rational, radius: &Rational) -> Result<ManipulationResponse, ApiError> {
    let i = e.agent_index(agent)?;
    if radius.is_negative() {
        return Err(ApiError::precondition("radius must be non-negative"));
    }
    let grid = ReportGrid::around(e.pref(i), step.clone(), radius, e.rho_menu().to_vec());
    grid.validate(e)?;
    let searched = grid.reports().len();
    let br = best_response(e, i, &grid)?;
    Ok(ManipulationResponse {
        agent: agent.to_string(),
        grid_step: step.clone(),
        radius: radius.clone(),
        reports_searched: searched,
        gain: &br.utility - &br.truthful_utility,
        truthful_utility: br.truthful_utility,
        best_utility: br.utility,
        report: ReportDocument::new(e, &br.report),
        outcome: AllocationDocument::from_allocation(e, &br.outcome),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriumOutcome {
    pub reports: BTreeMap<String, ReportDocument>,
    pub outcome: AllocationDocument,
    pub max_gain: Rational,
    /// Sup-norm distance of the rents to the true envy-free allocations with
    /// the same assignment; `None` when that assignment has none.
    pub distance: Option<Rational>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquilibriaResponse {
    pub epsilon: Rational,
    pub grid_step: Rational,
    pub radius: Rational,
    pub profiles: usize,
    pub max_distance: Option<Rational>,
    pub equilibria: Vec<EquilibriumOutcome>,
}

/// Every grid epsilon-equilibrium among truthful-centred report grids, the
/// budget and rho of each agent held at the truth.
pub fn equilibria(e: &Economy, eps: &Rational, step: &Rational, radius: &Rational) -> Result<EquilibriaResponse, ApiError> {
    if e.n() > 3 {
        return Err(ApiError::core(rentdiv_core::Error::TooLarge("equilibrium enumeration supports at most 3 agents".into())));
    }
    if eps.is_negative() || radius.is_negative() {
        return Err(ApiError::precondition("epsilon and radius must be non-negative"));
    }
    let grids: Vec<ReportGrid> = e.prefs().iter().map(|p| ReportGrid::around(p, step.clone(), radius, vec![p.rho.clone()])).collect();
    let table = OutcomeTable::build(e, &grids)?;
    let mut out = Vec::new();
    for p in 0..table.len() {
        let gain = table.max_gain(p);
        if gain > *eps {
            continue;
        }
        let z = &table.outcomes[p];
        let reports = table.profile(p).iter().zip(e.agents()).map(|(r, id)| (id.clone(), ReportDocument::new(e, r))).collect();
        out.push(EquilibriumOutcome {
            reports,
            outcome: AllocationDocument::from_allocation(e, z),
            max_gain: gain,
            distance: distance_to_envy_free(e, &z.assignment, &z.rents)?,
        });
    }
    let max_distance = out.iter().filter_map(|o| o.distance.clone()).max();
    Ok(EquilibriaResponse {
        epsilon: eps.clone(),
        grid_step: step.clone(),
        radius: radius.clone(),
        profiles: table.len(),
        max_distance,
        equilibria: out,
    })
}
