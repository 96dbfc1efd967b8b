//! JSON wire documents. Every rational travels as a string.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Allocation, Economy, Preference};
use crate::rational::Rational;

/// Largest document accepted by the parsers, in bytes.
pub const MAX_DOCUMENT_BYTES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentDocument {
    pub id: String,
    pub values: BTreeMap<String, Rational>,
    #[serde(default)]
    pub budget: Rational,
    #[serde(default)]
    pub rho: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EconomyDocument {
    pub agents: Vec<AgentDocument>,
    pub rooms: Vec<String>,
    pub total_rent: Rational,
    /// Defaults to zero plus every rho that occurs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_menu: Option<Vec<Rational>>,
    /// Defaults to the largest menu entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho_bar: Option<Rational>,
}

impl EconomyDocument {
    pub fn from_economy(e: &Economy) -> Self {
        let agents = e
            .agents()
            .iter()
            .zip(e.prefs())
            .map(|(id, p)| AgentDocument {
                id: id.clone(),
                values: e.rooms().iter().cloned().zip(p.values.iter().cloned()).collect(),
                budget: p.budget.clone(),
                rho: p.rho.clone(),
            })
            .collect();
        EconomyDocument {
            agents,
            rooms: e.rooms().to_vec(),
            total_rent: e.total_rent().clone(),
            rho_menu: Some(e.rho_menu().to_vec()),
            rho_bar: Some(e.rho_bar().clone()),
        }
    }

    pub fn to_economy(&self) -> Result<Economy> {
        let mut prefs = Vec::with_capacity(self.agents.len());
        for a in &self.agents {
            if a.values.len() != self.rooms.len() {
                return Err(Error::InvalidEconomy(format!("agent {} values {} rooms, expected {}", a.id, a.values.len(), self.rooms.len())));
            }
            let mut values = Vec::with_capacity(self.rooms.len());
            for room in &self.rooms {
                let v = a.values.get(room).ok_or_else(|| Error::UnknownRoom(format!("agent {} has no value for room {room}", a.id)))?;
                values.push(v.clone());
            }
            prefs.push(Preference { values, budget: a.budget.clone(), rho: a.rho.clone() });
        }
        let menu = match &self.rho_menu {
            Some(m) => m.clone(),
            None => {
                let mut m: Vec<Rational> = prefs.iter().map(|p| p.rho.clone()).collect();
                m.push(Rational::zero());
                m
            }
        };
        let rho_bar = match &self.rho_bar {
            Some(r) => r.clone(),
            None => menu.iter().cloned().max().unwrap_or_else(Rational::zero),
        };
        Economy::new(
            self.agents.iter().map(|a| a.id.clone()).collect(),
            self.rooms.clone(),
            prefs,
            self.total_rent.clone(),
            menu,
            rho_bar,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AllocationDocument {
    /// Agent id to room id.
    pub assignment: BTreeMap<String, String>,
    /// Room id to rent.
    pub rents: BTreeMap<String, Rational>,
}

impl AllocationDocument {
    pub fn from_allocation(e: &Economy, z: &Allocation) -> Self {
        AllocationDocument {
            assignment: z.assignment.iter().enumerate().map(|(i, &a)| (e.agents()[i].clone(), e.rooms()[a].clone())).collect(),
            rents: z.rents.iter().enumerate().map(|(a, r)| (e.rooms()[a].clone(), r.clone())).collect(),
        }
    }

    /// Resolves ids against `e`. The total is not checked here.
    pub fn to_allocation(&self, e: &Economy) -> Result<Allocation> {
        let n = e.n();
        if self.assignment.len() != n || self.rents.len() != n {
            return Err(Error::InvalidAllocation(format!("expected {n} agents and {n} rooms")));
        }
        let mut assignment = vec![0; n];
        for (agent, room) in &self.assignment {
            assignment[e.agent_index(agent)?] = e.room_index(room)?;
        }
        let mut rents = vec![Rational::zero(); n];
        for (room, r) in &self.rents {
            rents[e.room_index(room)?] = r.clone();
        }
        let z = Allocation::new(assignment, rents);
        z.validate(e)?;
        Ok(z)
    }
}

fn check_size(s: &str) -> Result<()> {
    if s.len() > MAX_DOCUMENT_BYTES {
        return Err(Error::InvalidEconomy(format!("document larger than {MAX_DOCUMENT_BYTES} bytes")));
    }
    Ok(())
}

pub fn parse_economy_document(s: &str) -> Result<EconomyDocument> {
    check_size(s)?;
    serde_json::from_str(s).map_err(|e| Error::InvalidEconomy(e.to_string()))
}

pub fn parse_economy(s: &str) -> Result<Economy> {
    parse_economy_document(s)?.to_economy()
}

pub fn parse_allocation(s: &str, e: &Economy) -> Result<Allocation> {
    check_size(s)?;
    let doc: AllocationDocument = serde_json::from_str(s).map_err(|err| Error::InvalidAllocation(err.to_string()))?;
    doc.to_allocation(e)
}

pub fn economy_to_json(e: &Economy) -> String {
    serde_json::to_string_pretty(&EconomyDocument::from_economy(e)).expect("documents serialize")
}

pub fn allocation_to_json(e: &Economy, z: &Allocation) -> String {
    serde_json::to_string_pretty(&AllocationDocument::from_allocation(e, z)).expect("documents serialize")
}
