#![allow(dead_code)]

use std::path::PathBuf;

use pathmatrix::{import_forest, load_dataset, CsvSchema, Dataset, Forest};

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

pub fn iris() -> Dataset {
    load_dataset(data_path("iris.csv"), &CsvSchema::new("species")).unwrap()
}

/// Iris with a 105/45 split where 10 of the 35 train versicolors satisfy
/// rule 3 of the hand-written forest.
pub fn iris_worked() -> Dataset {
    let d = iris();
    let mut mask = vec![false; d.n_instances()];
    let (mut setosa, mut virginica, mut r3_in, mut r3_out) = (0, 0, 0, 0);
    for (n, (x, &c)) in d.instances().iter().zip(d.labels()).enumerate() {
        mask[n] = match c {
            0 => {
                setosa += 1;
                setosa <= 35
            }
            2 => {
                virginica += 1;
                virginica <= 35
            }
            _ if x[0] > 6.15 && x[3] > 0.75 && x[3] <= 1.75 => {
                r3_in += 1;
                r3_in <= 10
            }
            _ => {
                r3_out += 1;
                r3_out <= 25
            }
        };
    }
    d.with_train_mask(mask).unwrap()
}

pub fn worked_forest() -> Forest {
    import_forest(&std::fs::read_to_string(data_path("worked_forest.json")).unwrap()).unwrap()
}

/// Instance 13 of the worked example (row 52 of the CSV, 0-based).
pub const X_WORKED: [f64; 4] = [6.9, 3.1, 4.9, 1.5];
