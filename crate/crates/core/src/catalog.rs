//! Reference network data: six Asia-Pacific service rotations and five
//! container vessel classes, with the default cost and emission rates.

use crate::instance::{CostRates, VesselClass};

/// Default admiralty coefficient; gives about 116 t/day for an 8,400 TEU
/// class at 20 kn carrying 4,000 TEU.
pub const DEFAULT_FUEL_COEFF: f64 = 7.0e-6;
pub const DEFAULT_TEU_WEIGHT_T: f64 = 10.0;
pub const SPEED_MIN_KN: f64 = 14.0;
pub const SPEED_MAX_KN: f64 = 24.0;
pub const MAX_SHIPS_PER_ROUTE: u32 = 15;

/// A rotation as `(port name, length of the leg to the next call)`.
pub type Rotation = &'static [(&'static str, f64)];

pub const ROTATIONS: [Rotation; 6] = [
    &[
        ("Ho Chi Minh", 589.0),
        ("Laem Chabang", 755.0),
        ("Singapore", 187.0),
        ("Port Klang", 830.0),
    ],
    &[
        ("Brisbane", 419.0),
        ("Sydney", 512.0),
        ("Melbourne", 470.0),
        ("Adelaide", 1325.0),
        ("Fremantle", 1733.0),
        ("Jakarta", 483.0),
        ("Singapore", 3649.0),
    ],
    &[
        ("Yokohama", 15.0),
        ("Tokyo", 177.0),
        ("Nagoya", 201.0),
        ("Kobe", 734.0),
        ("Shanghai", 745.0),
        ("Hong Kong", 1568.0),
    ],
    &[
        ("Dalian", 187.0),
        ("Xingang", 379.0),
        ("Qingdao", 303.0),
        ("Xiamen", 93.0),
        ("Ningbo", 93.0),
        ("Shanghai", 383.0),
        ("Kwangyang", 72.0),
        ("Busan", 487.0),
    ],
    &[
        ("Ho Chi Minh", 589.0),
        ("Laem Chabang", 755.0),
        ("Singapore", 187.0),
        ("Port Klang", 830.0),
        ("Qingdao", 345.0),
        ("Shanghai", 876.0),
    ],
    &[
        ("Brisbane", 419.0),
        ("Sydney", 512.0),
        ("Melbourne", 470.0),
        ("Adelaide", 1325.0),
        ("Fremantle", 1733.0),
        ("Jakarta", 483.0),
        ("Singapore", 3649.0),
        ("Colombo", 1287.0),
    ],
];

const C_OPR: [f64; 5] = [37_485.0, 51_923.0, 76_923.0, 115_384.0, 173_076.0];
const C_BERTH: [f64; 5] = [500.0, 1000.0, 1666.0, 3333.0, 5000.0];
const CAPACITY: [f64; 5] = [2400.0, 4800.0, 8400.0, 11_000.0, 15_000.0];
const EMPTY_WEIGHT: [f64; 5] = [21_832.0, 36_898.0, 54_753.0, 66_204.0, 79_612.0];
const HANDLING: [f64; 5] = [0.025, 0.012, 0.011, 0.008, 0.007];

/// Voyage fixed cost per rotation (rows) and vessel class (columns), USD/week.
pub const C_FIX: [[f64; 5]; 6] = [
    [154_791.0, 191_900.0, 240_500.0, 256_600.0, 276_100.0],
    [533_980.0, 689_651.0, 788_300.0, 854_600.0, 929_100.0],
    [226_198.0, 280_542.0, 342_760.0, 384_500.0, 404_000.0],
    [148_807.0, 187_600.0, 220_850.0, 259_800.0, 279_700.0],
    [197_892.0, 235_340.0, 292_760.0, 304_500.0, 324_000.0],
    [594_070.0, 730_527.0, 840_582.0, 929_753.0, 989_650.0],
];

/// Fixed time per port call listed with the vessel data. Not part of the
/// schedule recursion unless an instance opts in via `fixed_port_hours`.
pub const FIXED_PORT_CALL_HOURS: f64 = 4.0;

pub fn default_rates() -> CostRates {
    CostRates {
        c_load: 150.0,
        c_disc: 150.0,
        c_trans: 150.0,
        c_hold: 1.25,
        c_fuel: 500.0,
        c_emis: 32.0,
        e_sea: 3.082,
        e_port: 0.01729,
        teu_weight_t: DEFAULT_TEU_WEIGHT_T,
    }
}

/// Vessel class `class` (0-based) with fixed costs taken from the given
/// rotation rows, one entry per route of the instance being built.
pub fn vessel_class(class: usize, fix_rows: &[usize]) -> VesselClass {
    VesselClass {
        id: class as u32 + 1,
        capacity_teu: CAPACITY[class],
        c_opr: C_OPR[class],
        c_berth: C_BERTH[class],
        c_fix: fix_rows.iter().map(|&row| C_FIX[row][class]).collect(),
        handling_time_h_per_teu: HANDLING[class],
        empty_weight_t: EMPTY_WEIGHT[class],
        fuel_coeff_k: DEFAULT_FUEL_COEFF,
    }
}

pub const NUM_CLASSES: usize = 5;
