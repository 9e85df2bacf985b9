//! Hand-checked field values for the four reference plans.

use reliefplan_core::fixtures::ReferencePlan;
use reliefplan_core::model::EndStates;
use reliefplan_core::{TaskAssignment, parse_plan};

pub type Task = (u32, &'static str, &'static str, &'static str);

pub struct Expected {
    pub objective: &'static str,
    pub critical: &'static str,
    pub main: &'static [Task],
    pub aux: &'static [Task],
    pub end_states: [Option<&'static str>; 5],
}

const EXCAVATION: &str = "Emergency response team equipped with heavy-duty excavation and construction equipment.";
const OBJECTIVE: &str = "Restore accessibility to the city by clearing and securing the blocked roadway.";

pub fn expected(column: ReferencePlan) -> Expected {
    match column {
        ReferencePlan::Human => Expected {
            objective: OBJECTIVE,
            critical: "Clearing and securing the blocked roadway.",
            main: &[(
                1,
                "clear and secure the blocked roadway.",
                "re-establish accessibility to the city to allow the transport of supplies and rescue teams to other affected areas.",
                "one emergency response team equipped with heavy-duty excavation and construction equipment.",
            )],
            aux: &[
                (
                    2,
                    "assess risk of subsequent landslides.",
                    "ensure that roadway-clearing team can perform their task safely.",
                    "one geotechnical team.",
                ),
                (
                    3,
                    "search for survivors in the residential zone affected by the first landslide.",
                    "rescue survivors from initial landslide.",
                    "one disaster response units with search and rescue dogs and one medical team for immediate on-site treatment.",
                ),
                (
                    4,
                    "search for survivors in the main city zone affected by the earthquake.",
                    "rescue survivors from earthquake accessing the city via alternative route.",
                    "one disaster response units with search and rescue dogs.",
                ),
            ],
            end_states: [
                Some("all assets completed their task safely with no casualties."),
                Some("all victims were removed from the debris and given medical treatment."),
                Some("evacuated to safe areas and temporary shelters."),
                Some("roadway cleared allowing the transport of supplies and rescue teams to other affected areas."),
                None,
            ],
        },
        ReferencePlan::Gpt4 => Expected {
            objective: OBJECTIVE,
            critical: "Stabilizing the hill to prevent further landslides while clearing debris from the access road.",
            main: &[
                (
                    1,
                    "Stabilize the hill to prevent further landslides.",
                    "Enable safe debris removal from the access road.",
                    "Geotechnical team.",
                ),
                (
                    2,
                    "Clear and secure the access road.",
                    "Restore access to the city.",
                    "Emergency response team equipped with heavy-duty excavation and construction equipment, disaster response units with search and rescue dogs.",
                ),
            ],
            aux: &[(
                3,
                "Locate and rescue trapped individuals in destroyed houses and adjacent residential zones affected by the landslide.",
                "Save as many lives as possible.",
                "Disaster response units with search and rescue dogs, medical team for immediate on-site treatment.",
            )],
            end_states: [
                Some("All teams and equipment are safely withdrawn from the area after road accessibility has been restored."),
                Some("Rescued individuals receive immediate on-site treatment from the medical team and are evacuated."),
                Some("Civilians are informed about the stable access road and the possibility of evacuation or receiving emergency supplies."),
                Some("The access road is clear and secured, and potential landslide areas on the hill are stabilized."),
                None,
            ],
        },
        ReferencePlan::Gpt35 => Expected {
            objective: "Restore accessibility by clearing and securing the blocked roadway.",
            critical: "To prioritize the removal of debris from the roadway to restore accessibility while minimizing the risk to the response team by utilizing protective measures.",
            main: &[
                (
                    1,
                    "Remove debris from the roadway using excavation machines and dump trucks to clear access to the city.",
                    "To restore the accessibility.",
                    EXCAVATION,
                ),
                (
                    2,
                    "Stabilize the slope by dewatering to mitigate the risk of ongoing geological instability.",
                    "To prevent subsequent landslides.",
                    "Geotechnical team and emergency response team equipped with heavy-duty excavation and construction equipment.",
                ),
            ],
            aux: &[
                (
                    3,
                    "Conduct search and rescue operations in all destroyed houses before the road blockage to mitigate loss of life from people potentially trapped.",
                    "To identify and save potential survivors.",
                    "One disaster response unit with search and rescue dogs and one medical team for immediate on-site treatment.",
                ),
                (
                    4,
                    "Conduct search and rescue operations in the destroyed houses after removing debris to ensure no one is trapped or injured since the road blockage.",
                    "To identify and save potential survivors.",
                    "One disaster response unit with search and rescue dogs and one medical team for immediate on-site treatment.",
                ),
            ],
            end_states: [
                Some("Emergency response team equipped with heavy-duty excavation and construction equipment and geotechnical team have cleared the access to the city and mitigated risk of ongoing geological instability."),
                Some("Lives of people potentially trapped in destroyed homes before and after the road blockage have been saved."),
                Some("Access to the city has been restored."),
                Some("Slope stability has been stabilized."),
                None,
            ],
        },
        ReferencePlan::Bard => Expected {
            objective: OBJECTIVE,
            critical: "The safety of the rescue workers and the potential survivors. The ability to quickly and efficiently clear the roadway of debris. The ability to secure the roadway to prevent further landslides.",
            main: &[
                (
                    1,
                    "Assess the situation and develop a plan of action.",
                    "To determine the best way to clear the roadway and secure it against further landslides.",
                    "The geotechnical team.",
                ),
                (
                    2,
                    "Clear the roadway of debris.",
                    "To remove any obstacles that are preventing access to the city.",
                    "The emergency response team with heavy-duty excavation and construction equipment.",
                ),
                (
                    3,
                    "Secure the roadway against further landslides.",
                    "To prevent the roadway from collapsing again and blocking access to the city.",
                    "The geotechnical team.",
                ),
            ],
            aux: &[
                (
                    4,
                    "Search for and rescue potential survivors.",
                    "To locate and rescue any people who may be trapped in the destroyed houses.",
                    "The disaster response units with search and rescue dogs.",
                ),
                (
                    5,
                    "Provide medical care to the injured.",
                    "To provide immediate medical care to the injured survivors.",
                    "The medical team.",
                ),
            ],
            end_states: [
                None,
                None,
                None,
                None,
                Some("The roadway is clear and secure. The city is accessible to external assistance. The potential survivors have been rescued and are receiving medical care."),
            ],
        },
    }
}

fn end_state_fields(e: &EndStates) -> [Option<&str>; 5] {
    [
        e.assets.as_deref(),
        e.victims.as_deref(),
        e.civilians.as_deref(),
        e.terrain.as_deref(),
        e.other.as_deref(),
    ]
}

fn same<T: PartialEq + std::fmt::Debug>(what: String, got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: got {got:?}, expected {want:?}"))
    }
}

fn check_tasks(column: ReferencePlan, got: &[TaskAssignment], want: &[Task]) -> Result<(), String> {
    same(format!("{column:?} task count"), got.len(), want.len())?;
    for (t, &(index, description, purpose, raw)) in got.iter().zip(want) {
        same(format!("{column:?} task index"), t.index, index)?;
        same(format!("{column:?} task {index}"), t.description.as_str(), description)?;
        same(format!("{column:?} purpose {index}"), t.purpose.as_str(), purpose)?;
        same(format!("{column:?} assets {index}"), t.raw_asset_text.as_str(), raw)?;
    }
    Ok(())
}

/// Parses the column's raw text and compares every field with the table.
pub fn check_column(column: ReferencePlan) -> Result<(), String> {
    let (plan, diagnostics) = parse_plan(column.text());
    if let Some(d) = diagnostics.iter().find(|d| d.is_error()) {
        return Err(format!("{column:?}: {d}"));
    }
    let want = expected(column);
    same(format!("{column:?} objective"), plan.objective.as_str(), want.objective)?;
    same(format!("{column:?} critical"), plan.critical.as_str(), want.critical)?;
    check_tasks(column, &plan.main_ops, want.main)?;
    check_tasks(column, &plan.aux_ops, want.aux)?;
    same(format!("{column:?} end states"), end_state_fields(&plan.end_states), want.end_states)?;
    same(format!("{column:?} fas"), plan.fas.is_some(), false)
}
