#![allow(dead_code)]

use electroad::road::{Fleet, RoadSpec, Scenario};

/// Default road on a 1 kV base: two vehicles reach the far end well inside
/// the loadable range, and a 4 km road carries four of them.
pub fn stress() -> Scenario {
    Scenario {
        road: RoadSpec {
            v_base_kv: 1.0,
            ..RoadSpec::default()
        },
        ..Scenario::default()
    }
}

/// One vehicle behind one cable section.
pub fn two_bus_stress() -> Scenario {
    Scenario {
        road: RoadSpec {
            num_nodes: 2,
            v_base_kv: 1.0,
            ..RoadSpec::default()
        },
        fleets: vec![Fleet::forward(1, 2)],
        time_steps: 1,
        ..Scenario::default()
    }
}

/// Two fleets of two entering from opposite ends and passing each other.
pub fn harp() -> Scenario {
    Scenario {
        fleets: vec![Fleet::forward(2, 2), Fleet::reverse(2, 9)],
        ..Scenario::default()
    }
}
