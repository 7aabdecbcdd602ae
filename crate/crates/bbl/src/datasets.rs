//! Built-in datasets: the two-coin grid and the five-hospital tables.
//!
//! EMR covariates are stored in percent (4.30 means 4.30%), with a leading
//! constant column for the intercept.

use bbl_core::{Dataset, Group};

pub const HOSPITAL_N: [u32; 5] = [54, 75, 93, 104, 105];
pub const HOSPITAL_Y: [u32; 5] = [3, 4, 1, 1, 1];
pub const HOSPITAL_EMR: [f64; 5] = [4.30, 2.21, 2.59, 4.73, 3.28];

/// Only hospital 1 is interior.
pub const HYPOTHETICAL1_Y: [u32; 5] = [1, 0, 0, 0, 0];
/// Hospitals 1 and 2 are interior and share an EMR.
pub const HYPOTHETICAL2_Y: [u32; 5] = [1, 2, 0, 0, 0];
pub const HYPOTHETICAL2_EMR: [f64; 5] = [4.30, 4.30, 2.59, 4.73, 3.28];

fn hospital_table(y: [u32; 5], emr: [f64; 5]) -> Dataset {
    let groups =
        (0..5).map(|j| Group::new(HOSPITAL_N[j], y[j], vec![1.0, emr[j]]).expect("valid hospital row")).collect();
    Dataset::new(groups).expect("non-empty")
}

pub fn hospitals() -> Dataset {
    hospital_table(HOSPITAL_Y, HOSPITAL_EMR)
}

pub fn hypothetical1() -> Dataset {
    hospital_table(HYPOTHETICAL1_Y, HOSPITAL_EMR)
}

pub fn hypothetical2() -> Dataset {
    hospital_table(HYPOTHETICAL2_Y, HYPOTHETICAL2_EMR)
}

/// Two coins tossed twice each, with `y1` and `y2` heads.
pub fn coins(y1: u32, y2: u32) -> Dataset {
    Dataset::intercept_only(&[(2, y1), (2, y2)]).expect("y <= 2")
}

/// One coin tossed twice, both heads.
pub fn single_extreme_coin() -> Dataset {
    Dataset::intercept_only(&[(2, 2)]).expect("valid")
}

/// One coin tossed twice, one head.
pub fn single_interior_coin() -> Dataset {
    Dataset::intercept_only(&[(2, 1)]).expect("valid")
}

/// Looks up a built-in dataset by the name used on the command line.
pub fn builtin(name: &str) -> Option<Dataset> {
    match name {
        "hospitals" => Some(hospitals()),
        "hypothetical1" => Some(hypothetical1()),
        "hypothetical2" => Some(hypothetical2()),
        "single-extreme" => Some(single_extreme_coin()),
        "single-interior" => Some(single_interior_coin()),
        _ => {
            let rest = name.strip_prefix("coins-")?;
            let (a, b) = rest.split_once('-')?;
            let (y1, y2) = (a.parse().ok()?, b.parse().ok()?);
            (y1 <= 2 && y2 <= 2).then(|| coins(y1, y2))
        }
    }
}

pub const BUILTIN_NAMES: &[&str] =
    &["hospitals", "hypothetical1", "hypothetical2", "single-extreme", "single-interior", "coins-<y1>-<y2>"];
